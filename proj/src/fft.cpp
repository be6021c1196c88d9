// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "chroma_se/error.hpp"

namespace chroma_se::dsp {

namespace {

enum class PlanKind { kR2c, kC2cForward, kC2cBackward };

// FFTW's planner is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per (kind, size) and kept for the
// lifetime of the process.
class PlanCache {
 public:
  static PlanCache& Instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan Get(PlanKind kind, int n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_tuple(kind, n);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;

    double* real = fftw_alloc_real(static_cast<std::size_t>(n));
    fftw_complex* a = fftw_alloc_complex(static_cast<std::size_t>(n));
    fftw_complex* b = fftw_alloc_complex(static_cast<std::size_t>(n));
    fftw_plan plan = nullptr;
    switch (kind) {
      case PlanKind::kR2c:
        plan = fftw_plan_dft_r2c_1d(n, real, a, FFTW_ESTIMATE);
        break;
      case PlanKind::kC2cForward:
        plan = fftw_plan_dft_1d(n, a, b, FFTW_FORWARD, FFTW_ESTIMATE);
        break;
      case PlanKind::kC2cBackward:
        plan = fftw_plan_dft_1d(n, a, b, FFTW_BACKWARD, FFTW_ESTIMATE);
        break;
    }
    fftw_free(real);
    fftw_free(a);
    fftw_free(b);
    Require(plan != nullptr, ErrorCode::kState, "fft: planner failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mu_;
  std::map<std::tuple<PlanKind, int>, fftw_plan> plans_;
};

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T, FftwFree>;

}  // namespace

std::vector<std::complex<double>> Rfft(std::span<const double> frame) {
  const int n = static_cast<int>(frame.size());
  Require(n > 0, ErrorCode::kInvalidArgument, "fft: empty frame");
  fftw_plan plan = PlanCache::Instance().Get(PlanKind::kR2c, n);
  FftwBuffer<double> in(fftw_alloc_real(frame.size()));
  FftwBuffer<fftw_complex> out(fftw_alloc_complex(frame.size() / 2 + 1));
  std::copy(frame.begin(), frame.end(), in.get());
  fftw_execute_dft_r2c(plan, in.get(), out.get());
  std::vector<std::complex<double>> result(frame.size() / 2 + 1);
  for (std::size_t k = 0; k < result.size(); ++k) {
    result[k] = {out.get()[k][0], out.get()[k][1]};
  }
  return result;
}

std::vector<std::complex<double>> FullDft(std::span<const double> frame) {
  const int n = static_cast<int>(frame.size());
  Require(n > 0, ErrorCode::kInvalidArgument, "fft: empty frame");
  fftw_plan plan = PlanCache::Instance().Get(PlanKind::kC2cForward, n);
  FftwBuffer<fftw_complex> in(fftw_alloc_complex(frame.size()));
  FftwBuffer<fftw_complex> out(fftw_alloc_complex(frame.size()));
  for (std::size_t i = 0; i < frame.size(); ++i) {
    in.get()[i][0] = frame[i];
    in.get()[i][1] = 0.0;
  }
  fftw_execute_dft(plan, in.get(), out.get());
  std::vector<std::complex<double>> result(frame.size());
  for (std::size_t k = 0; k < result.size(); ++k) {
    result[k] = {out.get()[k][0], out.get()[k][1]};
  }
  return result;
}

std::vector<double> InverseDftReal(std::span<const std::complex<double>> spectrum) {
  const int n = static_cast<int>(spectrum.size());
  Require(n > 0, ErrorCode::kInvalidArgument, "fft: empty spectrum");
  fftw_plan plan = PlanCache::Instance().Get(PlanKind::kC2cBackward, n);
  FftwBuffer<fftw_complex> in(fftw_alloc_complex(spectrum.size()));
  FftwBuffer<fftw_complex> out(fftw_alloc_complex(spectrum.size()));
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    in.get()[k][0] = spectrum[k].real();
    in.get()[k][1] = spectrum[k].imag();
  }
  fftw_execute_dft(plan, in.get(), out.get());
  std::vector<double> result(spectrum.size());
  const double scale = 1.0 / n;
  for (std::size_t i = 0; i < result.size(); ++i) result[i] = out.get()[i][0] * scale;
  return result;
}

}  // namespace chroma_se::dsp
