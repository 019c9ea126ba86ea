#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "pmfno/fft.hpp"
#include "pmfno/linalg.hpp"
#include "pmfno/rng.hpp"
#include "pmfno/tensor.hpp"

using namespace pmfno;

namespace {

constexpr double kPi = std::numbers::pi;

// O(n^2) reference transform: forward unnormalized, inverse divides by n.
ComplexTensor naive_dft(const ComplexTensor& x, bool inverse) {
  const Index n = x.size();
  ComplexTensor y(x.shape());
  const double sgn = inverse ? 1.0 : -1.0;
  for (Index k = 0; k < n; ++k) {
    cplx acc(0.0, 0.0);
    for (Index j = 0; j < n; ++j) {
      const double ang = sgn * 2.0 * kPi * static_cast<double>(j * k) / static_cast<double>(n);
      acc += x[j] * cplx(std::cos(ang), std::sin(ang));
    }
    y[k] = inverse ? acc / static_cast<double>(n) : acc;
  }
  return y;
}

ComplexTensor random_complex(Index n, Rng& rng) {
  ComplexTensor x({n});
  for (Index i = 0; i < n; ++i) x[i] = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
  return x;
}

std::vector<cplx> sorted_eigs(Eigen::VectorXcd v) {
  std::vector<cplx> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor plumbing
// ---------------------------------------------------------------------------

TEST_CASE("tensor shape formatting and power-of-two predicate") {
  CHECK(shape_str({2, 64}) == "[2, 64]");
  CHECK(shape_str({5}) == "[5]");
  CHECK(shape_size({3, 4, 2}) == 24);
  CHECK(is_pow2(1));
  CHECK(is_pow2(64));
  CHECK_FALSE(is_pow2(0));
  CHECK_FALSE(is_pow2(12));
}

TEST_CASE("tensor row-major indexing and strides") {
  Tensor t({2, 3, 4});
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  CHECK(t.at(0, 0, 0) == 0.0);
  CHECK(t.at(0, 1, 2) == 6.0);
  CHECK(t.at(1, 2, 3) == 23.0);
  CHECK(t.stride(0) == 12);
  CHECK(t.stride(1) == 4);
  CHECK(t.stride(2) == 1);
}

TEST_CASE("frame slicing helpers") {
  Tensor t({4, 2, 3});
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);

  const Tensor head = leading_frames(t, 2);
  CHECK(head.shape() == Shape{2, 2, 3});
  for (Index i = 0; i < head.size(); ++i) CHECK(head[i] == t[i]);

  const Tensor f2 = frame_at(t, 2);
  CHECK(f2.shape() == Shape{2, 3});
  for (Index i = 0; i < f2.size(); ++i) CHECK(f2[i] == t[12 + i]);

  CHECK_THROWS_AS((void)leading_frames(t, 5), Error);
  CHECK_THROWS_AS((void)leading_frames(t, 0), Error);
}

TEST_CASE("finite check and error codes") {
  Tensor t({3});
  t.fill(1.0);
  CHECK(all_finite(t));
  t[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(all_finite(t));

  const Error e(Error::Code::synthesis, "boom");
  CHECK(e.code == Error::Code::synthesis);
  CHECK(std::string(e.what()) == "boom");
}

// ---------------------------------------------------------------------------
// FFT: naive-DFT oracle, closed-form bins, Parseval, linearity
// ---------------------------------------------------------------------------

TEST_CASE("complex transform matches the quadratic-time reference") {
  for (Index n : {4, 16, 64}) {
    Rng rng(91 + static_cast<std::uint64_t>(n));
    const ComplexTensor x = random_complex(n, rng);
    const ComplexTensor got = fft_1d(x, false);
    const ComplexTensor want = naive_dft(x, false);
    double err = 0.0;
    for (Index i = 0; i < n; ++i) err = std::max(err, std::abs(got[i] - want[i]));
    CHECK(err < 1e-11);

    const ComplexTensor back = fft_1d(got, true);
    double rt = 0.0;
    for (Index i = 0; i < n; ++i) rt = std::max(rt, std::abs(back[i] - x[i]));
    CHECK(rt < 1e-12);
  }
}

TEST_CASE("all-ones length four transforms to a single DC bin") {
  ComplexTensor x({4});
  for (Index i = 0; i < 4; ++i) x[i] = 1.0;
  const ComplexTensor y = fft_1d(x, false);
  CHECK(std::abs(y[0] - cplx(4, 0)) < 1e-14);
  for (Index i = 1; i < 4; ++i) CHECK(std::abs(y[i]) < 1e-14);
}

TEST_CASE("real transform closed forms: constant and pure cosine") {
  const Index n = 8;
  Tensor c({n});
  c.fill(0.7);
  const ComplexTensor cs = rfft_last_axis(c);
  CHECK(cs.shape() == Shape{n / 2 + 1});
  CHECK(std::abs(cs[0] - cplx(8 * 0.7, 0)) < 1e-13);
  for (Index k = 1; k <= n / 2; ++k) CHECK(std::abs(cs[k]) < 1e-13);

  Tensor w({n});
  for (Index i = 0; i < n; ++i) w[i] = std::cos(2.0 * kPi * static_cast<double>(i) / 8.0);
  const ComplexTensor ws = rfft_last_axis(w);
  CHECK(std::abs(ws[1] - cplx(4, 0)) < 1e-13);
  for (Index k = 0; k <= n / 2; ++k)
    if (k != 1) CHECK(std::abs(ws[k]) < 1e-13);
}

TEST_CASE("real transform round trip on random data") {
  Rng rng(7);
  Tensor x({16});
  for (Index i = 0; i < 16; ++i) x[i] = rng.uniform(-1, 1);
  const Tensor back = irfft_last_axis(rfft_last_axis(x), 16);
  double err = 0.0;
  for (Index i = 0; i < 16; ++i) err = std::max(err, std::abs(back[i] - x[i]));
  CHECK(err < 1e-12);
}

TEST_CASE("transform linearity") {
  Rng rng(11);
  const Index n = 32;
  const ComplexTensor x = random_complex(n, rng);
  const ComplexTensor y = random_complex(n, rng);
  const cplx alpha(0.3, -1.1), beta(-2.0, 0.4);
  ComplexTensor mix({n});
  for (Index i = 0; i < n; ++i) mix[i] = alpha * x[i] + beta * y[i];
  const ComplexTensor lhs = fft_1d(mix, false);
  const ComplexTensor fx = fft_1d(x, false), fy = fft_1d(y, false);
  double scale = 0.0, err = 0.0;
  for (Index i = 0; i < n; ++i) {
    const cplx rhs = alpha * fx[i] + beta * fy[i];
    scale = std::max(scale, std::abs(rhs));
    err = std::max(err, std::abs(lhs[i] - rhs));
  }
  CHECK(err < 1e-12 * scale);
}

TEST_CASE("Parseval identity") {
  Rng rng(13);
  const Index n = 64;
  const ComplexTensor x = random_complex(n, rng);
  const ComplexTensor s = fft_1d(x, false);
  double t_sum = 0.0, f_sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    t_sum += std::norm(x[i]);
    f_sum += std::norm(s[i]);
  }
  CHECK(std::abs(t_sum - f_sum / static_cast<double>(n)) < 1e-10 * t_sum);
}

TEST_CASE("axis transform equals per-column reference on a 2d block") {
  Rng rng(17);
  const Index rows = 4, cols = 8;
  ComplexTensor x({rows, cols});
  for (Index i = 0; i < x.size(); ++i) x[i] = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));

  ComplexTensor along0 = x;
  fft_axis(along0, 0, false);
  for (Index c = 0; c < cols; ++c) {
    ComplexTensor col({rows});
    for (Index r = 0; r < rows; ++r) col[r] = x.at(r, c);
    const ComplexTensor want = naive_dft(col, false);
    for (Index r = 0; r < rows; ++r) CHECK(std::abs(along0.at(r, c) - want[r]) < 1e-12);
  }

  ComplexTensor along1 = x;
  fft_axis(along1, 1, false);
  for (Index r = 0; r < rows; ++r) {
    ComplexTensor row({cols});
    for (Index c = 0; c < cols; ++c) row[c] = x.at(r, c);
    const ComplexTensor want = naive_dft(row, false);
    for (Index c = 0; c < cols; ++c) CHECK(std::abs(along1.at(r, c) - want[c]) < 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

TEST_CASE("identity system returns the right-hand side") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(5, 5);
  Eigen::MatrixXd b = Eigen::MatrixXd::Random(5, 3);
  const auto res = lstsq(a, b);
  CHECK((res.x - b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_FALSE(res.ill_conditioned);
}

TEST_CASE("overdetermined planted solution is recovered") {
  Rng rng(23);
  Eigen::MatrixXd a(10, 4);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-1, 1);
  Eigen::MatrixXd x0(4, 2);
  for (Index i = 0; i < x0.size(); ++i) x0.data()[i] = rng.uniform(-1, 1);
  const Eigen::MatrixXd b = a * x0;
  const auto res = lstsq(a, b);
  CHECK((res.x - x0).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("two stacked observations average") {
  Eigen::MatrixXd a(2, 1);
  a << 1, 1;
  Eigen::MatrixXd b(2, 1);
  b << 0, 2;
  const auto res = lstsq(a, b);
  CHECK(res.x(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("residual is orthogonal to the column space") {
  Rng rng(29);
  Eigen::MatrixXd a(12, 5);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-1, 1);
  Eigen::MatrixXd b(12, 1);
  for (Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-1, 1);
  const auto res = lstsq(a, b);
  const Eigen::MatrixXd normal_residual = a.transpose() * (a * res.x - b);
  CHECK(normal_residual.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rank-deficient systems are flagged but still solved") {
  Eigen::MatrixXd a(6, 3);
  Rng rng(31);
  for (Index i = 0; i < 6; ++i) {
    a(i, 0) = rng.uniform(-1, 1);
    a(i, 1) = 2.0 * a(i, 0);  // duplicate direction
    a(i, 2) = rng.uniform(-1, 1);
  }
  Eigen::MatrixXd b(6, 1);
  for (Index i = 0; i < 6; ++i) b(i, 0) = rng.uniform(-1, 1);
  const auto res = lstsq(a, b);
  CHECK(res.ill_conditioned);
  CHECK(res.x.allFinite());
  // The minimal-norm solution still reduces the residual below ||b||.
  CHECK((a * res.x - b).norm() < b.norm());
}

// ---------------------------------------------------------------------------
// Eigenvalues
// ---------------------------------------------------------------------------

TEST_CASE("diagonal matrix spectrum") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 2.0;
  a(1, 1) = -3.0;
  const auto eigs = sorted_eigs(eig_general(a));
  CHECK(std::abs(eigs[0] - cplx(-3, 0)) < 1e-12);
  CHECK(std::abs(eigs[1] - cplx(2, 0)) < 1e-12);
}

TEST_CASE("plane rotation spectrum") {
  const double th = kPi / 4.0;
  Eigen::MatrixXd a(2, 2);
  a << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  const auto eigs = sorted_eigs(eig_general(a));
  CHECK(std::abs(eigs[0] - std::exp(cplx(0, -th))) < 1e-12);
  CHECK(std::abs(eigs[1] - std::exp(cplx(0, th))) < 1e-12);
}

TEST_CASE("companion matrix of x^2+1 has roots +-i") {
  Eigen::MatrixXd a(2, 2);
  a << 0, -1, 1, 0;
  const auto eigs = sorted_eigs(eig_general(a));
  CHECK(std::abs(eigs[0] - cplx(0, -1)) < 1e-12);
  CHECK(std::abs(eigs[1] - cplx(0, 1)) < 1e-12);
}

TEST_CASE("symmetric matrices yield real eigenvalues") {
  Rng rng(37);
  Eigen::MatrixXd m(8, 8);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1, 1);
  const Eigen::MatrixXd a = 0.5 * (m + m.transpose());
  const auto eigs = eig_general(a);
  const double scale = a.norm();
  for (Index i = 0; i < eigs.size(); ++i) CHECK(std::abs(eigs[i].imag()) < 1e-10 * scale);
}

TEST_CASE("eigenvalue sum matches the trace and pairs conjugate") {
  Rng rng(41);
  Eigen::MatrixXd a(6, 6);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-1, 1);
  const auto eigs = eig_general(a);
  cplx sum(0, 0);
  for (Index i = 0; i < eigs.size(); ++i) sum += eigs[i];
  CHECK(std::abs(sum - cplx(a.trace(), 0)) < 1e-8 * a.norm());

  // Every complex eigenvalue has a conjugate partner.
  for (Index i = 0; i < eigs.size(); ++i) {
    if (std::abs(eigs[i].imag()) < 1e-12) continue;
    double best = 1e300;
    for (Index j = 0; j < eigs.size(); ++j)
      if (j != i) best = std::min(best, std::abs(eigs[j] - std::conj(eigs[i])));
    CHECK(best < 1e-8 * a.norm());
  }
}

// ---------------------------------------------------------------------------
// Deterministic random numbers
// ---------------------------------------------------------------------------

TEST_CASE("identical seeds replay identical sequences") {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived streams differ from each other") {
  Rng a = Rng::stream(1234, 1);
  Rng b = Rng::stream(1234, 2);
  int same = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() == b.next_u64()) ++same;
  CHECK(same == 0);
}

TEST_CASE("uniform draws stay inside their interval") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.uniform(-2.5, 1.5);
    CHECK(v >= -2.5);
    CHECK(v < 1.5);
  }
}

TEST_CASE("normal draws have unit scale") {
  Rng rng(5);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("bounded integers and shuffles are deterministic") {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);

  std::vector<int> a(10), b(10);
  for (int i = 0; i < 10; ++i) a[i] = b[i] = i;
  Rng ra(42), rb(42);
  ra.shuffle(a);
  rb.shuffle(b);
  CHECK(a == b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 10; ++i) CHECK(sorted[i] == i);
}
