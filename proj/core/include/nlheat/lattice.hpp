#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

namespace nlheat {

using Cplx = std::complex<double>;
using KVec = std::array<int, 3>; // block index, unused axes zero

// Periodized spectral field on [-L, L]^d, d in {1,2,3}. `spec` holds the
// coefficients c_xi of f(x) = sum c_xi e^{i xi x} in FFT layout (axis index
// m -> frequency (m <= n/2 ? m : m - n) * pi / L). Physical fields are kept
// conjugate-symmetric with an empty Nyquist row.
struct LatticeField {
    int d = 1;
    double L = 16.0;
    int n = 64;
    std::vector<Cplx> spec;

    static LatticeField zeros(int d, double L, int n);

    std::size_t size() const { return spec.size(); }
    double xi_of(int axis_index) const; // signed frequency of an axis index
    double dx() const { return 2.0 * L / n; }
    // largest representable |xi|_inf
    double xi_nyquist() const;
};

// signed per-axis frequency indices of flat index
void unravel(const LatticeField& f, std::size_t idx, std::array<int, 3>& m);
std::size_t ravel(const LatticeField& f, const std::array<int, 3>& m);

LatticeField fft_forward(int d, double L, int n, const std::vector<Cplx>& physical);
std::vector<Cplx> fft_inverse(const LatticeField& f);

// real-space samples; throws if the imaginary residue exceeds tol
std::vector<double> to_physical_real(const LatticeField& f, double tol = 1e-9);
LatticeField from_physical_real(int d, double L, int n, const std::vector<double>& values);

double lattice_lp(const LatticeField& f, double p); // physical L^p, complex modulus
double lattice_l2_spectral(const LatticeField& f);  // (2L)^{d/2} l2 of spec
double sobolev_norm(const LatticeField& f, double s);
double max_conjugate_asymmetry(const LatticeField& f);
// spectral mass fraction with |xi|_inf > cut
double spectral_mass_beyond(const LatticeField& f, double cut);

LatticeField apply_heat(const LatticeField& f, double t);          // e^{t Laplacian}
LatticeField apply_bessel(const LatticeField& f, double sigma);    // (I - Laplacian)^{sigma/2}

LatticeField add(const LatticeField& a, const LatticeField& b, double ca = 1.0, double cb = 1.0);

// Unit-scale partition of unity: psi_k = phi(xi - k) / sum_l phi(xi - l) with
// a tensorized smooth bump phi, 1 on [-1/2,1/2]^d, supported in [-1,1]^d.
struct BlockPartition {
    int d = 1;
    int K = 8;

    double psi(const KVec& k, const std::array<double, 3>& xi) const;
    bool in_range(const KVec& k) const;
    // all blocks |k|_inf <= K in lexicographic order
    std::vector<KVec> blocks() const;
};

BlockPartition build_block_partition(int d, int K);

LatticeField project_block(const LatticeField& f, const BlockPartition& bp, const KVec& k);

// (sum_k (1+|k|^2)^{s q/2} ||P_k f||_{L^p}^q)^{1/q}, max over k when q = inf
double modulation_norm(const LatticeField& f, const BlockPartition& bp, double p_exp,
                       double q_exp, double s);

} // namespace nlheat
