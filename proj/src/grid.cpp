#include "mvhom/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mvhom/errors.hpp"

namespace mvhom {

GridSpec::GridSpec(int dim, int cells_per_axis) : dim_(dim), n_(cells_per_axis) {
  if (dim != 1 && dim != 2) throw DomainError("grid dimension must be 1 or 2");
  if (cells_per_axis < 8 || (cells_per_axis & (cells_per_axis - 1)) != 0)
    throw DomainError("cells per axis must be a power of two >= 8, got " +
                      std::to_string(cells_per_axis));
  size_ = static_cast<std::size_t>(n_ - 1);
  if (dim_ == 2) size_ *= static_cast<std::size_t>(n_ - 1);
}

double GridSpec::cell_volume() const noexcept {
  const double h = spacing();
  return dim_ == 1 ? h : h * h;
}

std::size_t GridSpec::stride(int axis) const noexcept {
  return (dim_ == 2 && axis == 0) ? static_cast<std::size_t>(n_ - 1) : 1;
}

double GridSpec::coordinate(std::size_t idx, int axis) const noexcept {
  const std::size_t m = static_cast<std::size_t>(n_ - 1);
  std::size_t i = idx;
  if (dim_ == 2) i = (axis == 0) ? idx / m : idx % m;
  return static_cast<double>(i + 1) / n_;
}

// ---------------------------------------------------------------------------

ScalarField::ScalarField(const GridSpec& grid) : grid_(grid), values_(grid.size(), 0.0) {}

ScalarField::ScalarField(const GridSpec& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw DomainError("field has " + std::to_string(values_.size()) + " values, grid needs " +
                      std::to_string(grid_.size()));
  if (!all_finite()) throw NonFinite("field contains non-finite values");
}

bool ScalarField::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ScalarField& ScalarField::operator+=(const ScalarField& other) { return axpy(1.0, other); }
ScalarField& ScalarField::operator-=(const ScalarField& other) { return axpy(-1.0, other); }

ScalarField& ScalarField::operator*=(double c) noexcept {
  for (double& v : values_) v *= c;
  return *this;
}

ScalarField& ScalarField::axpy(double c, const ScalarField& other) {
  if (!(other.grid_ == grid_)) throw DomainError("field grids differ");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += c * other.values_[i];
  return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double c, ScalarField a) { return a *= c; }

// ---------------------------------------------------------------------------

VectorField::VectorField(const GridSpec& grid, int components)
    : components_(static_cast<std::size_t>(components), ScalarField(grid)) {
  if (components < 1) throw DomainError("vector field needs at least one component");
}

VectorField::VectorField(std::vector<ScalarField> components) : components_(std::move(components)) {
  if (components_.empty()) throw DomainError("vector field needs at least one component");
  for (const auto& c : components_)
    if (!(c.grid() == components_.front().grid())) throw DomainError("component grids differ");
}

bool VectorField::all_finite() const noexcept {
  return std::all_of(components_.begin(), components_.end(),
                     [](const ScalarField& c) { return c.all_finite(); });
}

VectorField& VectorField::operator+=(const VectorField& other) { return axpy(1.0, other); }
VectorField& VectorField::operator-=(const VectorField& other) { return axpy(-1.0, other); }

VectorField& VectorField::operator*=(double c) noexcept {
  for (auto& comp : components_) comp *= c;
  return *this;
}

VectorField& VectorField::axpy(double c, const VectorField& other) {
  if (other.component_count() != component_count()) throw DomainError("component counts differ");
  for (std::size_t i = 0; i < components_.size(); ++i) components_[i].axpy(c, other.components_[i]);
  return *this;
}

VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }

// ---- norms -----------------------------------------------------------------

double inner_H(const ScalarField& f, const ScalarField& g) {
  if (!(f.grid() == g.grid())) throw DomainError("field grids differ");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * g[i];
  return s * f.grid().cell_volume();
}

double inner_H(const VectorField& f, const VectorField& g) {
  double s = 0.0;
  for (int c = 0; c < f.component_count(); ++c) s += inner_H(f[c], g[c]);
  return s;
}

double norm_H(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v * v;
  return std::sqrt(s * f.grid().cell_volume());
}

double gradient_energy(const ScalarField& f) {
  const GridSpec& g = f.grid();
  const int m = g.interior();
  const auto v = f.values();
  double s = 0.0;
  auto line = [&](std::size_t start, std::size_t stride) {
    double prev = 0.0;
    for (int i = 0; i < m; ++i) {
      const double cur = v[start + i * stride];
      const double d = cur - prev;
      s += d * d;
      prev = cur;
    }
    s += prev * prev;
  };
  if (g.dim() == 1) {
    line(0, 1);
  } else {
    const std::size_t mm = static_cast<std::size_t>(m);
    for (std::size_t j = 0; j < mm; ++j) line(j, mm);       // along axis 0
    for (std::size_t i = 0; i < mm; ++i) line(i * mm, 1);   // along axis 1
  }
  const double h = g.spacing();
  return s * g.cell_volume() / (h * h);
}

double norm_V(const ScalarField& f) { return std::sqrt(gradient_energy(f)); }

double norm_L4(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v * v * v * v;
  return std::pow(s * f.grid().cell_volume(), 0.25);
}

namespace {

double minus1_weight(const SineMode& k) {
  return 1.0 / (1.0 + std::numbers::pi * std::numbers::pi * k.squared_magnitude());
}

}  // namespace

double norm_Hminus1_proxy(const ScalarField& f) {
  const auto c = sine_coefficients(f);
  const GridSpec& g = f.grid();
  const int m = g.interior();
  double s = 0.0;
  if (g.dim() == 1) {
    for (int k = 0; k < m; ++k) s += c[k] * c[k] * minus1_weight({k + 1, 0});
  } else {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        const double ck = c[static_cast<std::size_t>(i) * m + j];
        s += ck * ck * minus1_weight({i + 1, j + 1});
      }
  }
  return std::sqrt(s);
}

std::vector<double> hminus1_coordinates(const ScalarField& f) {
  auto c = sine_coefficients(f);
  const GridSpec& g = f.grid();
  const int m = g.interior();
  if (g.dim() == 1) {
    for (int k = 0; k < m; ++k) c[k] *= std::sqrt(minus1_weight({k + 1, 0}));
  } else {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        c[static_cast<std::size_t>(i) * m + j] *= std::sqrt(minus1_weight({i + 1, j + 1}));
  }
  return c;
}

double max_abs(const ScalarField& f) noexcept {
  double s = 0.0;
  for (double v : f.values()) s = std::max(s, std::abs(v));
  return s;
}

double norm_H(const VectorField& f) {
  double s = 0.0;
  for (int c = 0; c < f.component_count(); ++c) {
    const double n = norm_H(f[c]);
    s += n * n;
  }
  return std::sqrt(s);
}

double norm_V(const VectorField& f) {
  double s = 0.0;
  for (int c = 0; c < f.component_count(); ++c) s += gradient_energy(f[c]);
  return std::sqrt(s);
}

double norm_L4(const VectorField& f) {
  // Pointwise |u|^4 with |u| the Euclidean norm over components.
  const std::size_t size = f.grid().size();
  double s = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    double sq = 0.0;
    for (int c = 0; c < f.component_count(); ++c) sq += f[c][i] * f[c][i];
    s += sq * sq;
  }
  return std::pow(s * f.grid().cell_volume(), 0.25);
}

double norm_Hminus1_proxy(const VectorField& f) {
  double s = 0.0;
  for (int c = 0; c < f.component_count(); ++c) {
    const double n = norm_Hminus1_proxy(f[c]);
    s += n * n;
  }
  return std::sqrt(s);
}

double max_abs(const VectorField& f) noexcept {
  double s = 0.0;
  for (int c = 0; c < f.component_count(); ++c) s = std::max(s, max_abs(f[c]));
  return s;
}

// ---- sine transform ----------------------------------------------------------

namespace {

// FFTW planning is not thread-safe; execution on fresh arrays is.
class SinePlans {
 public:
  static SinePlans& instance() {
    static SinePlans plans;
    return plans;
  }

  fftw_plan get(int dim, int m) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(dim, m);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const std::size_t size = dim == 1 ? m : static_cast<std::size_t>(m) * m;
    std::vector<double> in(size), out(size);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = dim == 1
        ? fftw_plan_r2r_1d(m, in.data(), out.data(), FFTW_RODFT00, flags)
        : fftw_plan_r2r_2d(m, m, in.data(), out.data(), FFTW_RODFT00, FFTW_RODFT00, flags);
    plans_.emplace(key, plan);
    return plan;
  }

  ~SinePlans() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

// DST-I with FFTW's scaling: Y_k = 2 sum_j X_j sin(pi (j+1)(k+1) / n).
std::vector<double> dst1(const GridSpec& g, std::span<const double> in) {
  std::vector<double> src(in.begin(), in.end());
  std::vector<double> out(in.size());
  fftw_execute_r2r(SinePlans::instance().get(g.dim(), g.interior()), src.data(), out.data());
  return out;
}

}  // namespace

std::vector<double> sine_coefficients(const ScalarField& f) {
  const GridSpec& g = f.grid();
  auto y = dst1(g, f.values());
  // (f, e_k)_H = h sum_j f_j sqrt(2) sin(...) = (h sqrt(2) / 2) Y_k per axis.
  double scale = g.spacing() * std::numbers::sqrt2 / 2.0;
  if (g.dim() == 2) scale *= scale;
  for (double& v : y) v *= scale;
  return y;
}

ScalarField from_sine_coefficients(const GridSpec& g, std::span<const double> coeffs) {
  if (coeffs.size() != g.size()) throw DomainError("coefficient count does not match grid");
  auto y = dst1(g, coeffs);
  double scale = std::numbers::sqrt2 / 2.0;
  if (g.dim() == 2) scale *= scale;
  for (double& v : y) v *= scale;
  return ScalarField(g, std::move(y));
}

std::vector<SineMode> ordered_modes(const GridSpec& g, std::size_t count) {
  const int m = g.interior();
  std::vector<SineMode> modes;
  if (g.dim() == 1) {
    for (int k = 1; k <= m; ++k) modes.push_back({k, 0});
  } else {
    for (int i = 1; i <= m; ++i)
      for (int j = 1; j <= m; ++j) modes.push_back({i, j});
    std::stable_sort(modes.begin(), modes.end(), [](const SineMode& a, const SineMode& b) {
      return a.squared_magnitude() < b.squared_magnitude();
    });
  }
  if (count > modes.size()) throw DomainError("grid resolves only " + std::to_string(modes.size()) + " modes");
  modes.resize(count);
  return modes;
}

std::size_t mode_index(const GridSpec& g, const SineMode& k) {
  if (g.dim() == 1) return static_cast<std::size_t>(k.k1 - 1);
  return static_cast<std::size_t>(k.k1 - 1) * g.interior() + static_cast<std::size_t>(k.k2 - 1);
}

ScalarField sine_mode(const GridSpec& g, const SineMode& k) {
  ScalarField f(g);
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double v = std::numbers::sqrt2 * std::sin(k.k1 * pi * g.coordinate(i, 0));
    if (g.dim() == 2) v *= std::numbers::sqrt2 * std::sin(k.k2 * pi * g.coordinate(i, 1));
    f[i] = v;
  }
  return f;
}

// ---- CSV ---------------------------------------------------------------------

void write_csv(std::ostream& out, const ScalarField& f) {
  const GridSpec& g = f.grid();
  out << "# N=" << g.dim() << " n=" << g.cells() << " ordering=row-major\n";
  out << (g.dim() == 1 ? "index,x1,value\n" : "index,x1,x2,value\n");
  char buf[96];
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.dim() == 1)
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, g.coordinate(i, 0), f[i]);
    else
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, g.coordinate(i, 0),
                    g.coordinate(i, 1), f[i]);
    out << buf;
  }
}

ScalarField read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw IoError("field CSV: missing metadata line");
  int dim = 0, n = 0;
  char order[32] = {0};
  if (std::sscanf(line.c_str(), "# N=%d n=%d ordering=%31s", &dim, &n, order) != 3 ||
      std::string(order) != "row-major")
    throw IoError("field CSV: malformed metadata line '" + line + "'");
  GridSpec g(dim, n);
  std::getline(in, line);  // header
  std::vector<double> values;
  values.reserve(g.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto pos = line.rfind(',');
    values.push_back(std::stod(line.substr(pos + 1)));
  }
  return ScalarField(g, std::move(values));
}

}  // namespace mvhom
