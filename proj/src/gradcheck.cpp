#include "precise/gradcheck.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "precise/model.hpp"
#include "precise/objective.hpp"
#include "precise/random.hpp"

namespace precise {

double relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), floor});
}

GradientComparison compare_gradients(const ScalarFunction& f, std::span<Tensor<double>> inputs, double eps) {
  GradientComparison result;
  {
    Tape<double> tape;
    const Tensor<double> out = f(tape);
    for (Tensor<double>& t : inputs) t.zero_grad();
    tape.backward(out);
    result.kink_margin = tape.kink_margin();
  }
  auto eval = [&f] {
    Tape<double> tape(Recording::kOff);
    return f(tape).item();
  };
  for (Tensor<double>& t : inputs) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    std::vector<double> numeric(t.size());
    auto values = t.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + eps;
      const double up = eval();
      values[i] = orig - eps;
      const double down = eval();
      values[i] = orig;
      numeric[i] = (up - down) / (2.0 * eps);
    }
    result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic, numeric));
  }
  return result;
}

namespace {

struct Instance {
  std::vector<Tensor<double>> inputs;  // tensors whose gradients are checked
  ScalarFunction f;
};

using Generator = std::function<Instance(Rng&)>;

Tensor<double> uniform(Rng& rng, Shape shape, double lo = -2.0, double hi = 2.0, bool requires_grad = true) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(element_count(shape));
  for (double& x : v) x = dist(rng);
  return Tensor<double>(std::move(shape), std::move(v), requires_grad);
}

// sum(out * R) with a fixed random R exercises the full Jacobian.
Tensor<double> project(Tape<double>& tape, const Tensor<double>& out, const Tensor<double>& weights) {
  return tape.sum(tape.mul(out, weights));
}

Generator unary_op(std::function<Tensor<double>(Tape<double>&, const Tensor<double>&)> op, Shape shape) {
  return [op, shape](Rng& rng) {
    Tensor<double> a = uniform(rng, shape);
    Tensor<double> r;
    {
      Tape<double> probe(Recording::kOff);
      r = uniform(rng, op(probe, a).shape(), -1.0, 1.0, false);
    }
    return Instance{{a}, [op, a, r](Tape<double>& t) { return project(t, op(t, a), r); }};
  };
}

Generator binary_op(std::function<Tensor<double>(Tape<double>&, const Tensor<double>&, const Tensor<double>&)> op,
                    Shape sa, Shape sb) {
  return [op, sa, sb](Rng& rng) {
    Tensor<double> a = uniform(rng, sa), b = uniform(rng, sb);
    Tensor<double> r;
    {
      Tape<double> probe(Recording::kOff);
      r = uniform(rng, op(probe, a, b).shape(), -1.0, 1.0, false);
    }
    return Instance{{a, b}, [op, a, b, r](Tape<double>& t) { return project(t, op(t, a, b), r); }};
  };
}

struct SmallModel {
  PreciseModel<double> model;
  Batch<double> batch;
};

SmallModel small_model(Rng& rng, std::vector<ClassIndex> labels) {
  ArchitectureSpec arch;
  arch.image_height = 3;
  arch.image_width = 3;
  arch.hidden = {5};
  arch.latent_dim = 3;
  SmallModel s{PreciseModel<double>::init(arch, 2, 2, rng()), {}};
  const std::size_t n = labels.size();
  s.batch.inputs = uniform(rng, {n, arch.pixels()}, -2.0, 2.0, false);
  s.batch.targets = uniform(rng, {n, arch.pixels()}, 0.0, 1.0, false);
  s.batch.labels = std::move(labels);
  return s;
}

Generator model_loss(PrototypeLossMode mode, std::vector<ClassIndex> labels) {
  return [mode, labels](Rng& rng) {
    auto s = std::make_shared<SmallModel>(small_model(rng, labels));
    const LossWeights w{1.0, 0.5, {0.7, 2.0}};  // lambda2 enlarged so the prototype terms register
    return Instance{s->model.parameters(), [s, w, mode](Tape<double>& t) {
                      return total_loss(t, s->batch, s->model, w, mode).total;
                    }};
  };
}

}  // namespace

std::vector<GradCheckOutcome> run_gradcheck_suite(const GradCheckOptions& options) {
  using T = Tape<double>;
  using Ten = Tensor<double>;
  std::vector<std::pair<std::string, Generator>> cases;

  cases.emplace_back("matmul", binary_op([](T& t, const Ten& a, const Ten& b) { return t.matmul(a, b); }, {3, 4}, {4, 2}));
  cases.emplace_back("transpose", unary_op([](T& t, const Ten& a) { return t.transpose(a); }, {2, 3}));
  for (const char* tag : {"add", "sub", "mul"}) {
    const ElementwiseOp op = parse_elementwise_op(tag);
    cases.emplace_back(tag, binary_op([op](T& t, const Ten& a, const Ten& b) { return t.elementwise(op, a, b); },
                                      {2, 3}, {2, 3}));
  }
  cases.emplace_back("scalar-mul", binary_op([](T& t, const Ten& a, const Ten& b) {
                       return t.elementwise(ElementwiseOp::kScalarMul, a, b);
                     }, {2, 3}, {1}));
  cases.emplace_back("scale", unary_op([](T& t, const Ten& a) { return t.scale(a, -1.75); }, {2, 3}));
  for (const char* tag : {"relu", "sigmoid", "exp"}) {
    const ElementwiseOp op = parse_elementwise_op(tag);
    cases.emplace_back(tag, unary_op([op](T& t, const Ten& a) { return t.elementwise(op, a); }, {2, 3}));
  }
  cases.emplace_back("add_row_vector", binary_op([](T& t, const Ten& a, const Ten& v) {
                       return t.add_row_vector(a, v);
                     }, {3, 4}, {4}));
  cases.emplace_back("clamp_min", unary_op([](T& t, const Ten& a) { return t.clamp_min(a, -0.5); }, {3, 3}));
  for (const char* tag : {"sum", "mean", "min"}) {
    const ReduceOp op = parse_reduce_op(tag);
    cases.emplace_back(std::string(tag) + "(all)", unary_op([op](T& t, const Ten& a) { return t.reduce(op, a); }, {3, 4}));
    for (std::size_t axis : {0, 1}) {
      cases.emplace_back(std::string(tag) + "(axis " + std::to_string(axis) + ")",
                         unary_op([op, axis](T& t, const Ten& a) { return t.reduce(op, a, axis); }, {3, 4}));
    }
  }
  cases.emplace_back("gather", unary_op([](T& t, const Ten& a) {
                       const std::size_t idx[] = {5, 0, 5, 2, 7, 1};
                       return t.gather(a, idx, {2, 3});
                     }, {2, 4}));
  cases.emplace_back("euclidean_distance_rows", binary_op([](T& t, const Ten& a, const Ten& b) {
                       return t.euclidean_distance_rows(a, b);
                     }, {3, 2}, {2, 2}));
  cases.emplace_back("log_softmax", unary_op([](T& t, const Ten& a) { return t.log_softmax(a); }, {4, 3}));
  cases.emplace_back("ae_loss", binary_op([](T& t, const Ten& x, const Ten& r) { return ae_loss(t, x, r); }, {3, 5}, {3, 5}));
  cases.emplace_back("weighted_ce", unary_op([](T& t, const Ten& logits) {
                       const ClassIndex labels[] = {0, 2, 1, 2};
                       const double weights[] = {0.5, 1.5, 3.0};
                       return weighted_ce(t, t.log_softmax(logits), labels, weights);
                     }, {4, 3}));
  cases.emplace_back("proto_loss_reserved", binary_op([](T& t, const Ten& z, const Ten& p) {
                       const ClassIndex labels[] = {0, 1, 1, 0, 1};
                       const auto terms = proto_loss_reserved(t, z, labels, PrototypeBank<double>{p, ReservationMap(2, 2)});
                       return t.add(terms.term1, t.scale(terms.term2, 1.3));
                     }, {5, 3}, {4, 3}));
  cases.emplace_back("proto_loss_reserved(single class)", binary_op([](T& t, const Ten& z, const Ten& p) {
                       const ClassIndex labels[] = {1, 1, 1};
                       const auto terms = proto_loss_reserved(t, z, labels, PrototypeBank<double>{p, ReservationMap(2, 2)});
                       return t.add(terms.term1, t.scale(terms.term2, 1.3));
                     }, {3, 3}, {4, 3}));
  cases.emplace_back("proto_loss_unreserved", binary_op([](T& t, const Ten& z, const Ten& p) {
                       const auto terms = proto_loss_unreserved(t, z, PrototypeBank<double>{p, ReservationMap(2, 2)});
                       return t.add(terms.term1, t.scale(terms.term2, 1.3));
                     }, {5, 3}, {4, 3}));
  cases.emplace_back("encode", [](Rng& rng) {
    auto s = std::make_shared<SmallModel>(small_model(rng, {0, 1}));
    const Ten r = uniform(rng, {2, 3}, -1.0, 1.0, false);
    return Instance{s->model.parameters(),
                    [s, r](T& t) { return project(t, s->model.encode(t, s->batch.inputs), r); }};
  });
  cases.emplace_back("forward", [](Rng& rng) {
    auto s = std::make_shared<SmallModel>(small_model(rng, {0, 1}));
    const Ten r1 = uniform(rng, {2, 9}, -1.0, 1.0, false), r2 = uniform(rng, {2, 2}, -1.0, 1.0, false);
    return Instance{s->model.parameters(), [s, r1, r2](T& t) {
                      const auto f = s->model.forward(t, s->batch.inputs);
                      return t.add(project(t, f.reconstruction, r1), project(t, f.log_probs, r2));
                    }};
  });
  cases.emplace_back("total_loss(reserved)", model_loss(PrototypeLossMode::kReserved, {0, 1, 1, 0}));
  cases.emplace_back("total_loss(reserved, single class)", model_loss(PrototypeLossMode::kReserved, {1, 1, 1, 1}));
  cases.emplace_back("total_loss(unreserved)", model_loss(PrototypeLossMode::kUnreserved, {0, 1, 1, 0}));

  std::vector<GradCheckOutcome> outcomes;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    GradCheckOutcome out;
    out.name = cases[c].first;
    Rng rng(derive_seed(options.seed, c));
    const std::size_t max_attempts = options.instances * 50;
    for (std::size_t attempt = 0; out.instances < options.instances && attempt < max_attempts; ++attempt) {
      Instance inst = cases[c].second(rng);
      const GradientComparison cmp = compare_gradients(inst.f, inst.inputs, options.eps);
      if (cmp.kink_margin < options.min_kink_margin) {
        ++out.rejected;
        continue;
      }
      ++out.instances;
      out.max_rel_error = std::max(out.max_rel_error, cmp.max_rel_error);
    }
    out.passed = out.instances == options.instances && out.max_rel_error < options.tolerance;
    outcomes.push_back(out);
  }
  return outcomes;
}

void print_gradcheck_report(std::ostream& out, const std::vector<GradCheckOutcome>& outcomes) {
  for (const auto& o : outcomes) {
    out << (o.passed ? "PASS " : "FAIL ") << std::left << std::setw(38) << o.name << " instances=" << o.instances
        << " rejected=" << o.rejected << " max_rel_err=" << std::scientific << std::setprecision(3) << o.max_rel_error
        << std::defaultfloat << '\n';
  }
}

}  // namespace precise
