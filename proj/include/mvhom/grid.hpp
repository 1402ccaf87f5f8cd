#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mvhom {

/// Uniform grid on the open unit box (0,1)^N with homogeneous Dirichlet
/// boundary. Unknowns live on the (n-1)^N interior nodes x = (i+1) h,
/// stored row-major (axis 0 slowest).
class GridSpec {
 public:
  GridSpec(int dim, int cells_per_axis);

  int dim() const noexcept { return dim_; }
  int cells() const noexcept { return n_; }
  int interior() const noexcept { return n_ - 1; }
  double spacing() const noexcept { return 1.0 / n_; }
  std::size_t size() const noexcept { return size_; }
  /// h^N, the midpoint quadrature weight of every node.
  double cell_volume() const noexcept;
  /// Node coordinate along `axis` for flat index `idx`.
  double coordinate(std::size_t idx, int axis) const noexcept;
  /// Stride of `axis` in the flat index.
  std::size_t stride(int axis) const noexcept;

  bool operator==(const GridSpec&) const = default;

 private:
  int dim_;
  int n_;
  std::size_t size_;
};

class ScalarField {
 public:
  explicit ScalarField(const GridSpec& grid);
  /// Throws NonFinite if any value is NaN/Inf, DomainError on size mismatch.
  ScalarField(const GridSpec& grid, std::vector<double> values);

  const GridSpec& grid() const noexcept { return grid_; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }

  bool all_finite() const noexcept;

  ScalarField& operator+=(const ScalarField& other);
  ScalarField& operator-=(const ScalarField& other);
  ScalarField& operator*=(double c) noexcept;
  /// this += c * other
  ScalarField& axpy(double c, const ScalarField& other);

  bool operator==(const ScalarField&) const = default;

 private:
  GridSpec grid_;
  std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double c, ScalarField a);

/// N scalar components on one grid. The scalar models use a single
/// component; the 2D fluid model uses two.
class VectorField {
 public:
  VectorField(const GridSpec& grid, int components);
  explicit VectorField(std::vector<ScalarField> components);

  const GridSpec& grid() const noexcept { return components_.front().grid(); }
  int component_count() const noexcept { return static_cast<int>(components_.size()); }
  ScalarField& operator[](int c) noexcept { return components_[c]; }
  const ScalarField& operator[](int c) const noexcept { return components_[c]; }

  bool all_finite() const noexcept;

  VectorField& operator+=(const VectorField& other);
  VectorField& operator-=(const VectorField& other);
  VectorField& operator*=(double c) noexcept;
  VectorField& axpy(double c, const VectorField& other);

  bool operator==(const VectorField&) const = default;

 private:
  std::vector<ScalarField> components_;
};

VectorField operator-(VectorField a, const VectorField& b);

double inner_H(const ScalarField& f, const ScalarField& g);
double inner_H(const VectorField& f, const VectorField& g);

double norm_H(const ScalarField& f);
double norm_V(const ScalarField& f);
double norm_L4(const ScalarField& f);
double norm_Hminus1_proxy(const ScalarField& f);
double max_abs(const ScalarField& f) noexcept;

/// Sine coefficients weighted so that their Euclidean norm is the H^-1 proxy;
/// linear in f.
std::vector<double> hminus1_coordinates(const ScalarField& f);

double norm_H(const VectorField& f);
double norm_V(const VectorField& f);
double norm_L4(const VectorField& f);
double norm_Hminus1_proxy(const VectorField& f);
double max_abs(const VectorField& f) noexcept;

/// Squared forward differences summed over every face (boundary faces see
/// the zero trace), times h^N / h^2. norm_V(f)^2 without the square root.
double gradient_energy(const ScalarField& f);

// ---- Dirichlet sine basis ------------------------------------------------

/// Multi-index of a sine mode, each entry in 1..n-1.
struct SineMode {
  int k1 = 1;
  int k2 = 0;  // unused in 1D
  int squared_magnitude() const noexcept { return k1 * k1 + k2 * k2; }
};

/// First `count` modes ordered by |k|^2, ties broken lexicographically.
std::vector<SineMode> ordered_modes(const GridSpec& grid, std::size_t count);

/// Flat index of a mode in the array returned by sine_coefficients.
std::size_t mode_index(const GridSpec& grid, const SineMode& mode);

/// H-orthonormal basis function e_k(x) = prod_d sqrt(2) sin(k_d pi x_d).
ScalarField sine_mode(const GridSpec& grid, const SineMode& mode);

/// Coefficients (f, e_k)_H for every mode, laid out like the field
/// (entry for mode k at mode_index(k)).
std::vector<double> sine_coefficients(const ScalarField& f);

/// Inverse of sine_coefficients.
ScalarField from_sine_coefficients(const GridSpec& grid, std::span<const double> coeffs);

// ---- serialization ---------------------------------------------------------

/// Flat CSV: a `#` metadata line (N, n, ordering), a header line, then one
/// row per node with its coordinates and value.
void write_csv(std::ostream& out, const ScalarField& f);
ScalarField read_csv(std::istream& in);

}  // namespace mvhom
