#include "nlheat/lattice.hpp"

#include "nlheat/util.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace nlheat {

namespace {

std::size_t total_size(int d, int n) {
    std::size_t s = 1;
    for (int i = 0; i < d; ++i) s *= static_cast<std::size_t>(n);
    return s;
}

// FFTW plans are not thread-safe to create; keep one cached pair per geometry
struct PlanPair {
    fftw_plan fwd = nullptr, bwd = nullptr;
    fftw_complex* buf = nullptr;
    std::size_t size = 0;
};

PlanPair& plan_for(int d, int n) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, PlanPair> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& p = cache[{d, n}];
    if (!p.fwd) {
        p.size = total_size(d, n);
        p.buf = fftw_alloc_complex(p.size);
        std::vector<int> dims(d, n);
        p.fwd = fftw_plan_dft(d, dims.data(), p.buf, p.buf, FFTW_FORWARD, FFTW_ESTIMATE);
        p.bwd = fftw_plan_dft(d, dims.data(), p.buf, p.buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    return p;
}

std::mutex& plan_exec_mutex() {
    static std::mutex mu;
    return mu;
}

} // namespace

LatticeField LatticeField::zeros(int d, double L, int n) {
    if (d < 1 || d > 3) throw ConfigError("LatticeField: d in {1,2,3} required");
    if (n < 4 || n % 2 != 0) throw ConfigError("LatticeField: even n >= 4 required");
    if (!(L > 0.0)) throw ConfigError("LatticeField: L > 0 required");
    LatticeField f;
    f.d = d;
    f.L = L;
    f.n = n;
    f.spec.assign(total_size(d, n), Cplx(0.0, 0.0));
    return f;
}

double LatticeField::xi_of(int axis_index) const {
    const int m = axis_index < n / 2 ? axis_index : axis_index - n;
    return m * M_PI / L;
}

double LatticeField::xi_nyquist() const { return (n / 2) * M_PI / L; }

void unravel(const LatticeField& f, std::size_t idx, std::array<int, 3>& m) {
    m = {0, 0, 0};
    for (int ax = f.d - 1; ax >= 0; --ax) {
        const int raw = static_cast<int>(idx % f.n);
        idx /= f.n;
        m[ax] = raw < f.n / 2 ? raw : raw - f.n; // Nyquist raw == n/2 maps to lower edge
        if (raw == f.n / 2) m[ax] = -f.n / 2;
    }
}

std::size_t ravel(const LatticeField& f, const std::array<int, 3>& m) {
    std::size_t idx = 0;
    for (int ax = 0; ax < f.d; ++ax) {
        int raw = m[ax] >= 0 ? m[ax] : m[ax] + f.n;
        if (raw < 0 || raw >= f.n) throw ConfigError("ravel: frequency index out of range");
        idx = idx * f.n + static_cast<std::size_t>(raw);
    }
    return idx;
}

LatticeField fft_forward(int d, double L, int n, const std::vector<Cplx>& physical) {
    LatticeField f = LatticeField::zeros(d, L, n);
    if (physical.size() != f.size()) throw ConfigError("fft_forward: size mismatch");
    std::lock_guard<std::mutex> lock(plan_exec_mutex());
    PlanPair& p = plan_for(d, n);
    for (std::size_t i = 0; i < f.size(); ++i) {
        p.buf[i][0] = physical[i].real();
        p.buf[i][1] = physical[i].imag();
    }
    fftw_execute(p.fwd);
    const double scale = 1.0 / static_cast<double>(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        f.spec[i] = Cplx(p.buf[i][0] * scale, p.buf[i][1] * scale);
    return f;
}

std::vector<Cplx> fft_inverse(const LatticeField& f) {
    std::lock_guard<std::mutex> lock(plan_exec_mutex());
    PlanPair& p = plan_for(f.d, f.n);
    for (std::size_t i = 0; i < f.size(); ++i) {
        p.buf[i][0] = f.spec[i].real();
        p.buf[i][1] = f.spec[i].imag();
    }
    fftw_execute(p.bwd);
    std::vector<Cplx> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = Cplx(p.buf[i][0], p.buf[i][1]);
    return out;
}

std::vector<double> to_physical_real(const LatticeField& f, double tol) {
    const std::vector<Cplx> phys = fft_inverse(f);
    double scale = 0.0;
    for (const Cplx& c : phys) scale = std::max(scale, std::abs(c));
    std::vector<double> out(phys.size());
    for (std::size_t i = 0; i < phys.size(); ++i) {
        if (std::fabs(phys[i].imag()) > tol * std::max(1.0, scale))
            throw NumericalError("to_physical_real: imaginary residue above tolerance");
        out[i] = phys[i].real();
    }
    return out;
}

LatticeField from_physical_real(int d, double L, int n, const std::vector<double>& values) {
    std::vector<Cplx> phys(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) phys[i] = Cplx(values[i], 0.0);
    return fft_forward(d, L, n, phys);
}

double lattice_lp(const LatticeField& f, double p) {
    if (!(p >= 1.0)) throw ConfigError("lattice_lp: p >= 1 required");
    const std::vector<Cplx> phys = fft_inverse(f);
    const double cell = std::pow(f.dx(), f.d);
    double s = 0.0;
    for (const Cplx& c : phys) s += pow_fast(std::abs(c), p);
    return std::pow(cell * s, 1.0 / p);
}

double lattice_l2_spectral(const LatticeField& f) {
    double s = 0.0;
    for (const Cplx& c : f.spec) s += std::norm(c);
    return std::sqrt(std::pow(2.0 * f.L, f.d) * s);
}

double sobolev_norm(const LatticeField& f, double s) {
    std::array<int, 3> m;
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f.spec[i] == Cplx(0.0, 0.0)) continue;
        unravel(f, i, m);
        double xi2 = 0.0;
        for (int ax = 0; ax < f.d; ++ax) {
            const double xi = m[ax] * M_PI / f.L;
            xi2 += xi * xi;
        }
        acc += std::pow(1.0 + xi2, s) * std::norm(f.spec[i]);
    }
    return std::sqrt(std::pow(2.0 * f.L, f.d) * acc);
}

double max_conjugate_asymmetry(const LatticeField& f) {
    std::array<int, 3> m, neg;
    double worst = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        unravel(f, i, m);
        bool has_partner = true;
        for (int ax = 0; ax < f.d; ++ax) {
            if (m[ax] == -f.n / 2) has_partner = false; // Nyquist row
            neg[ax] = -m[ax];
        }
        if (!has_partner) {
            worst = std::max(worst, std::abs(f.spec[i]));
            continue;
        }
        const Cplx other = f.spec[ravel(f, neg)];
        worst = std::max(worst, std::abs(f.spec[i] - std::conj(other)));
    }
    return worst;
}

double spectral_mass_beyond(const LatticeField& f, double cut) {
    std::array<int, 3> m;
    double in = 0.0, out = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double mass = std::norm(f.spec[i]);
        if (mass == 0.0) continue;
        unravel(f, i, m);
        double xi_inf = 0.0;
        for (int ax = 0; ax < f.d; ++ax)
            xi_inf = std::max(xi_inf, std::fabs(m[ax] * M_PI / f.L));
        (xi_inf > cut ? out : in) += mass;
    }
    const double tot = in + out;
    return tot > 0.0 ? out / tot : 0.0;
}

LatticeField apply_heat(const LatticeField& f, double t) {
    if (t < 0.0) throw ConfigError("apply_heat: t >= 0 required");
    LatticeField g = f;
    std::array<int, 3> m;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.spec[i] == Cplx(0.0, 0.0)) continue;
        unravel(g, i, m);
        double xi2 = 0.0;
        for (int ax = 0; ax < g.d; ++ax) {
            const double xi = m[ax] * M_PI / g.L;
            xi2 += xi * xi;
        }
        g.spec[i] *= std::exp(-xi2 * t);
    }
    return g;
}

LatticeField apply_bessel(const LatticeField& f, double sigma) {
    LatticeField g = f;
    std::array<int, 3> m;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.spec[i] == Cplx(0.0, 0.0)) continue;
        unravel(g, i, m);
        double xi2 = 0.0;
        for (int ax = 0; ax < g.d; ++ax) {
            const double xi = m[ax] * M_PI / g.L;
            xi2 += xi * xi;
        }
        g.spec[i] *= std::pow(1.0 + xi2, 0.5 * sigma);
    }
    return g;
}

LatticeField add(const LatticeField& a, const LatticeField& b, double ca, double cb) {
    if (a.d != b.d || a.n != b.n || a.L != b.L) throw ConfigError("add: geometry mismatch");
    LatticeField out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.spec[i] = ca * a.spec[i] + cb * b.spec[i];
    return out;
}

namespace {

// smooth transition h(t): 0 for t <= 0, 1 for t >= 1
double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

// 1 on [-1/2, 1/2], 0 outside (-1, 1), even and smooth
double bump1(double x) {
    x = std::fabs(x);
    if (x <= 0.5) return 1.0;
    if (x >= 1.0) return 0.0;
    return smooth_step(2.0 * (1.0 - x));
}

double psi1(int k, double x) {
    const double num = bump1(x - k);
    if (num == 0.0) return 0.0;
    const int base = static_cast<int>(std::floor(x));
    double den = 0.0;
    for (int l = base - 1; l <= base + 1; ++l) den += bump1(x - l);
    return num / den;
}

} // namespace

BlockPartition build_block_partition(int d, int K) {
    if (d < 1 || d > 3) throw ConfigError("build_block_partition: d in {1,2,3} required");
    if (K < 1) throw ConfigError("build_block_partition: K >= 1 required");
    BlockPartition bp;
    bp.d = d;
    bp.K = K;
    return bp;
}

double BlockPartition::psi(const KVec& k, const std::array<double, 3>& xi) const {
    double out = 1.0;
    for (int ax = 0; ax < d; ++ax) {
        out *= psi1(k[ax], xi[ax]);
        if (out == 0.0) return 0.0;
    }
    return out;
}

bool BlockPartition::in_range(const KVec& k) const {
    for (int ax = 0; ax < d; ++ax)
        if (std::abs(k[ax]) > K) return false;
    return true;
}

std::vector<KVec> BlockPartition::blocks() const {
    std::vector<KVec> out;
    KVec k{0, 0, 0};
    const int lo = -K, hi = K;
    if (d == 1) {
        for (k[0] = lo; k[0] <= hi; ++k[0]) out.push_back(k);
    } else if (d == 2) {
        for (k[0] = lo; k[0] <= hi; ++k[0])
            for (k[1] = lo; k[1] <= hi; ++k[1]) out.push_back(k);
    } else {
        for (k[0] = lo; k[0] <= hi; ++k[0])
            for (k[1] = lo; k[1] <= hi; ++k[1])
                for (k[2] = lo; k[2] <= hi; ++k[2]) out.push_back(k);
    }
    return out;
}

LatticeField project_block(const LatticeField& f, const BlockPartition& bp, const KVec& k) {
    if (!bp.in_range(k)) throw ConfigError("project_block: block outside the partition range");
    LatticeField g = LatticeField::zeros(f.d, f.L, f.n);
    std::array<int, 3> m;
    std::array<double, 3> xi{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f.spec[i] == Cplx(0.0, 0.0)) continue;
        unravel(f, i, m);
        bool near = true;
        for (int ax = 0; ax < f.d; ++ax) {
            xi[ax] = m[ax] * M_PI / f.L;
            if (std::fabs(xi[ax] - k[ax]) >= 1.0) near = false;
        }
        if (!near) continue;
        const double w = bp.psi(k, xi);
        if (w != 0.0) g.spec[i] = w * f.spec[i];
    }
    return g;
}

double modulation_norm(const LatticeField& f, const BlockPartition& bp, double p_exp,
                       double q_exp, double s) {
    if (!(p_exp >= 1.0) || !(q_exp >= 1.0))
        throw ConfigError("modulation_norm: exponents >= 1 required");
    const bool qinf = std::isinf(q_exp);
    double acc = 0.0;
    for (const KVec& k : bp.blocks()) {
        const LatticeField pk = project_block(f, bp, k);
        bool empty = true;
        for (const Cplx& c : pk.spec)
            if (c != Cplx(0.0, 0.0)) {
                empty = false;
                break;
            }
        if (empty) continue;
        const double lp = std::isinf(p_exp)
                              ? [&] {
                                    const auto phys = fft_inverse(pk);
                                    double m = 0.0;
                                    for (const Cplx& c : phys) m = std::max(m, std::abs(c));
                                    return m;
                                }()
                              : lattice_lp(pk, p_exp);
        double k2 = 0.0;
        for (int ax = 0; ax < bp.d; ++ax) k2 += static_cast<double>(k[ax]) * k[ax];
        const double wgt = std::pow(1.0 + k2, 0.5 * s);
        if (qinf)
            acc = std::max(acc, wgt * lp);
        else
            acc += std::pow(wgt * lp, q_exp);
    }
    return qinf ? acc : std::pow(acc, 1.0 / q_exp);
}

} // namespace nlheat
