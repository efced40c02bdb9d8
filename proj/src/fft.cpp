#include "jamdet/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "jamdet/common.hpp"

namespace jamdet::fft {
namespace {

// FFTW planning is not thread-safe; execution on a finished plan is.
class PlanCache {
public:
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan get(std::size_t n, int sign) {
        std::lock_guard lock(mutex_);
        auto key = std::make_pair(n, sign);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        auto* in = fftw_alloc_complex(n);
        auto* out = fftw_alloc_complex(n);
        fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), in, out, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(in);
        fftw_free(out);
        if (!p) throw Error("FFTW failed to create a plan of size " + std::to_string(n));
        plans_.emplace(key, p);
        return p;
    }

private:
    std::mutex mutex_;
    std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

void run(std::span<const cplx> in, std::span<cplx> out, int sign) {
    if (in.size() != out.size()) throw Error("fft: input and output lengths differ");
    if (in.empty()) return;
    if (in.data() == out.data()) throw Error("fft: in-place transform not supported");
    fftw_plan p = cache().get(in.size(), sign);
    // FFTW never writes through `in` for out-of-place plans.
    auto* src = reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data()));
    fftw_execute_dft(p, src, reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace

void forward(std::span<const cplx> in, std::span<cplx> out) { run(in, out, FFTW_FORWARD); }

void inverse(std::span<const cplx> in, std::span<cplx> out) { run(in, out, FFTW_BACKWARD); }

}  // namespace jamdet::fft
