#include "parasq/fft.hpp"

#include <fftw3.h>

#include <atomic>
#include <cstdlib>
#include <mutex>

namespace parasq {

namespace {
std::mutex planner_mutex;
}

namespace {
std::atomic<int> thread_override{0};
}  // namespace

void set_thread_override(int n) { thread_override = n; }

int thread_count() {
    if (int o = thread_override.load(); o > 0) return o;
    const char* env = std::getenv("PARASQ_THREADS");
    if (!env) return 1;
    int n = std::atoi(env);
    return n > 0 ? n : 1;
}

void fft2d(std::vector<cplx>& data, int64_t n, int sign) {
    if (static_cast<int64_t>(data.size()) != n * n) throw Error("fft2d: size mismatch");
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex);
        plan = fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), p, p,
                                sign > 0 ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard<std::mutex> lock(planner_mutex);
    fftw_destroy_plan(plan);
}

void fft1d(std::vector<cplx>& data, int sign) {
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex);
        plan = fftw_plan_dft_1d(static_cast<int>(data.size()), p, p,
                                sign > 0 ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard<std::mutex> lock(planner_mutex);
    fftw_destroy_plan(plan);
}

}  // namespace parasq
