#include "semibloch/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace semibloch::fft {
namespace {

class PlanCache {
public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int dim, int n, int sign) {
    std::lock_guard lock(mu_);
    auto key = std::make_tuple(dim, n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n);
    std::vector<fftw_complex> scratch(total);
    std::vector<int> dims(dim, n);
    fftw_plan plan = fftw_plan_dft(dim, dims.data(), scratch.data(), scratch.data(), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) throw std::runtime_error("fftw: plan creation failed");
    plans_.emplace(key, plan);
    return plan;
  }

private:
  std::mutex mu_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void run(std::span<const cd> in, std::span<cd> out, int dim, int n, int sign) {
  if (dim < 1 || dim > 2 || n < 1) throw std::invalid_argument("fft: unsupported shape");
  std::size_t total = dim == 1 ? std::size_t(n) : std::size_t(n) * std::size_t(n);
  if (in.size() != total || out.size() != total)
    throw std::invalid_argument("fft: buffer size does not match shape");
  if (in.data() != out.data()) std::copy(in.begin(), in.end(), out.begin());
  fftw_plan plan = cache().get(dim, n, sign);
  auto* buf = reinterpret_cast<fftw_complex*>(out.data());
  fftw_execute_dft(plan, buf, buf);
}

}  // namespace

void forward(std::span<const cd> in, std::span<cd> out, int dim, int n) {
  run(in, out, dim, n, FFTW_FORWARD);
}

void backward(std::span<const cd> in, std::span<cd> out, int dim, int n) {
  run(in, out, dim, n, FFTW_BACKWARD);
}

}  // namespace semibloch::fft
