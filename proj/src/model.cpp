#include "socicnn/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace socicnn {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::Negativity: return "negativity";
    case ErrorCode::NonpositiveAlpha: return "nonpositive-alpha";
    case ErrorCode::NegativeLambda: return "negative-lambda";
    case ErrorCode::InvalidDescriptor: return "invalid-descriptor";
    case ErrorCode::NonFiniteInput: return "non-finite-input";
    case ErrorCode::InfeasibleBranch: return "infeasible-branch";
    case ErrorCode::TooManyDegeneracies: return "too-many-degeneracies";
    case ErrorCode::DegenerateInput: return "degenerate-input";
    case ErrorCode::SolveFailure: return "solve-failure";
    case ErrorCode::InvalidConfig: return "invalid-config";
    case ErrorCode::ParseError: return "parse-error";
    case ErrorCode::IoError: return "io-error";
  }
  return "unknown";
}

std::size_t SocIcnnParams::relu_units() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += static_cast<std::size_t>(layer.b.size());
  return n;
}

Architecture Architecture::uniform(Eigen::Index input_dim, Eigen::Index width, std::size_t depth,
                                   std::size_t quad_count, Eigen::Index quad_dim,
                                   std::size_t cone_count, Eigen::Index cone_dim) {
  Architecture arch;
  arch.input_dim = input_dim;
  arch.widths.assign(depth, width);
  arch.quad_dims.assign(quad_count, quad_dim);
  arch.cone_dims.assign(cone_count, cone_dim);
  return arch;
}

namespace {

Validation fail(ErrorCode code, std::string message) { return {code, std::move(message)}; }

std::string where(const char* what, std::size_t index) {
  std::ostringstream os;
  os << what << "[" << index << "]";
  return os.str();
}

}  // namespace

Validation validate(const SocIcnnParams& params) {
  const auto d0 = params.input_dim;
  if (d0 <= 0) return fail(ErrorCode::DimensionMismatch, "input_dim must be positive");
  if (params.layers.empty()) return fail(ErrorCode::DimensionMismatch, "network has no layers");

  Eigen::Index prev_width = 0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    const auto width = layer.b.size();
    if (width <= 0) return fail(ErrorCode::DimensionMismatch, where("layer", l) + " has zero width");
    if (layer.W.rows() != width || layer.W.cols() != d0)
      return fail(ErrorCode::DimensionMismatch, where("layer", l) + ".W shape");
    if (layer.U.rows() != width || layer.U.cols() != prev_width)
      return fail(ErrorCode::DimensionMismatch, where("layer", l) + ".U shape");
    prev_width = width;
  }
  if (params.c.size() != prev_width) return fail(ErrorCode::DimensionMismatch, "c size");
  if (params.v.size() != d0) return fail(ErrorCode::DimensionMismatch, "v size");
  for (std::size_t h = 0; h < params.quad.size(); ++h) {
    const auto& m = params.quad[h];
    if (m.B.cols() != d0 || m.B.rows() != m.e.size() || m.e.size() == 0)
      return fail(ErrorCode::DimensionMismatch, where("quad", h) + " shape");
  }
  for (std::size_t g = 0; g < params.cone.size(); ++g) {
    const auto& m = params.cone[g];
    if (m.A.cols() != d0 || m.A.rows() != m.d.size() || m.d.size() == 0)
      return fail(ErrorCode::DimensionMismatch, where("cone", g) + " shape");
  }

  for (std::size_t l = 1; l < params.layers.size(); ++l) {
    if ((params.layers[l].U.array() < 0.0).any())
      return fail(ErrorCode::Negativity, where("layer", l) + ".U has a negative entry");
  }
  if ((params.c.array() < 0.0).any()) return fail(ErrorCode::Negativity, "c has a negative entry");
  for (std::size_t h = 0; h < params.quad.size(); ++h) {
    if (!(params.quad[h].alpha > 0.0))
      return fail(ErrorCode::NonpositiveAlpha, where("quad", h) + ".alpha must be > 0");
  }
  for (std::size_t g = 0; g < params.cone.size(); ++g) {
    if (!(params.cone[g].lambda >= 0.0))
      return fail(ErrorCode::NegativeLambda, where("cone", g) + ".lambda must be >= 0");
  }
  return {};
}

void require_valid(const SocIcnnParams& params) {
  const auto verdict = validate(params);
  if (!verdict) throw Error(*verdict.error, verdict.message);
}

SocIcnnParams build_random(std::uint64_t seed, const Architecture& arch) {
  if (arch.input_dim <= 0 || arch.widths.empty())
    throw Error(ErrorCode::InvalidDescriptor, "input dimension and depth must be positive");
  for (auto w : arch.widths)
    if (w <= 0) throw Error(ErrorCode::InvalidDescriptor, "layer widths must be positive");
  for (auto k : arch.quad_dims)
    if (k <= 0) throw Error(ErrorCode::InvalidDescriptor, "quadratic module dims must be positive");
  for (auto k : arch.cone_dims)
    if (k <= 0) throw Error(ErrorCode::InvalidDescriptor, "conic module dims must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit_interval(0.5, 1.5);

  auto gaussian = [&](Eigen::Index rows, Eigen::Index cols, double scale) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * normal(rng);
    return m;
  };
  auto gaussian_vec = [&](Eigen::Index n, double scale) {
    Vector out(n);
    for (Eigen::Index i = 0; i < n; ++i) out(i) = scale * normal(rng);
    return out;
  };

  const double in_scale = 1.0 / std::sqrt(static_cast<double>(arch.input_dim));

  SocIcnnParams p;
  p.seed = seed;
  p.input_dim = arch.input_dim;
  Eigen::Index prev = 0;
  for (auto width : arch.widths) {
    // A unit sees the input through W and the previous layer through U.
    const double layer_scale = 1.0 / std::sqrt(static_cast<double>(arch.input_dim + prev));
    Layer layer;
    layer.W = gaussian(width, arch.input_dim, layer_scale);
    if (prev > 0) {
      layer.U = gaussian(width, prev, layer_scale).cwiseAbs();
    } else {
      layer.U = Matrix(width, 0);
    }
    layer.b = gaussian_vec(width, layer_scale);
    p.layers.push_back(std::move(layer));
    prev = width;
  }
  p.c = gaussian_vec(prev, 1.0 / std::sqrt(static_cast<double>(prev))).cwiseAbs();
  p.v = gaussian_vec(arch.input_dim, in_scale);
  p.b0 = 0.0;
  for (auto k : arch.quad_dims) {
    QuadModule m;
    m.alpha = unit_interval(rng);
    m.B = gaussian(k, arch.input_dim, in_scale);
    m.e = gaussian_vec(k, in_scale);
    p.quad.push_back(std::move(m));
  }
  for (auto k : arch.cone_dims) {
    ConeModule m;
    m.lambda = unit_interval(rng);
    m.A = gaussian(k, arch.input_dim, in_scale);
    m.d = gaussian_vec(k, in_scale);
    p.cone.push_back(std::move(m));
  }
  require_valid(p);
  return p;
}

Vector linear_part(const Layer& layer, const Vector& x, const Vector& z_prev) {
  Vector s = layer.W * x;
  if (layer.U.cols() > 0) s.noalias() += layer.U * z_prev;
  return s;
}

namespace {

Vector cone_linear(const ConeModule& m, const Vector& x) { return m.A * x; }

}  // namespace

DegenerateInstance build_degenerate_2d(const DegenerateSpec& spec) {
  constexpr double kMargin = 0.1;
  constexpr double kTarget = 0.5;
  constexpr double kSmoothScale = 0.3;
  constexpr double kConeResidual = 1.5;

  Architecture arch;
  arch.input_dim = 2;
  arch.widths = {3, 3};
  arch.quad_dims = {2};
  arch.cone_dims = {2, 2};

  DegenerateInstance out;
  out.params = build_random(spec.seed, arch);
  auto& p = out.params;
  if (spec.relu_layer >= p.layers.size() || spec.relu_unit < 0 ||
      spec.relu_unit >= p.width(spec.relu_layer) || spec.cone_module >= p.cone.size())
    throw Error(ErrorCode::InvalidDescriptor, "degenerate coordinate out of range");

  out.x0 = Vector(2);
  out.x0 << 0.3, -0.2;
  const Vector& x0 = out.x0;

  Vector z_prev(0);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    const Vector s = linear_part(layer, x0, z_prev);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (l == spec.relu_layer && i == spec.relu_unit) {
        layer.b(i) = -s(i);
      } else if (l > spec.relu_layer) {
        // Downstream units stay active so the kinked unit has a positive multiplier range.
        if (s(i) + layer.b(i) < kTarget) layer.b(i) = kTarget + 0.25 * static_cast<double>(i) - s(i);
      } else if (std::abs(s(i) + layer.b(i)) < kMargin) {
        layer.b(i) = (s(i) + layer.b(i) >= 0.0 ? kTarget : -kTarget) - s(i);
      }
    }
    Vector a = s;
    a += layer.b;
    z_prev = a.cwiseMax(0.0);
  }

  // Keep the smooth curvature along rays through x0 mild (O(0.1)).
  for (auto& m : p.quad) {
    m.B *= kSmoothScale;
    m.e *= kSmoothScale;
  }
  for (std::size_t g = 0; g < p.cone.size(); ++g) {
    auto& m = p.cone[g];
    const Vector ax = cone_linear(m, x0);
    if (g == spec.cone_module) {
      m.d = -ax;
    } else {
      m.A *= kSmoothScale;
      Vector u = cone_linear(m, x0);
      u += m.d;
      const double norm = u.norm();
      Vector unit = Vector::Unit(u.size(), 0);
      if (norm > 0.0) unit = u / norm;
      if (norm < kConeResidual) m.d += kConeResidual * unit - u;
    }
  }
  return out;
}

ForwardTrace forward(const SocIcnnParams& params, const Vector& x) {
  if (x.size() != params.input_dim)
    throw Error(ErrorCode::DimensionMismatch, "input has wrong dimension");
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteInput, "input has non-finite entries");

  ForwardTrace t;
  t.x = x;
  t.pre.reserve(params.layers.size());
  t.act.reserve(params.layers.size());
  Vector z_prev(0);
  for (const auto& layer : params.layers) {
    Vector a = linear_part(layer, x, z_prev);
    a += layer.b;
    z_prev = a.cwiseMax(0.0);
    t.pre.push_back(std::move(a));
    t.act.push_back(z_prev);
  }
  t.relu_value = params.c.dot(z_prev) + params.v.dot(x) + params.b0;

  double value = t.relu_value;
  for (const auto& m : params.quad) {
    Vector q = m.B * x;
    q += m.e;
    value += 0.5 * m.alpha * q.squaredNorm();
    t.quad_res.push_back(std::move(q));
  }
  for (const auto& m : params.cone) {
    Vector u = cone_linear(m, x);
    u += m.d;
    value += m.lambda * u.norm();
    t.cone_res.push_back(std::move(u));
  }
  t.value = value;
  return t;
}

double evaluate(const SocIcnnParams& params, const Vector& x) { return forward(params, x).value; }

DegeneracyReport degeneracy_report(const ForwardTrace& trace, double tol) {
  DegeneracyReport report;
  report.tol = tol;
  for (std::size_t l = 0; l < trace.pre.size(); ++l) {
    const auto& a = trace.pre[l];
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (std::abs(a(i)) <= tol) report.relu_zero.push_back({l, i});
  }
  for (std::size_t g = 0; g < trace.cone_res.size(); ++g)
    if (trace.cone_res[g].norm() <= tol) report.cone_zero.push_back(g);
  return report;
}

}  // namespace socicnn
