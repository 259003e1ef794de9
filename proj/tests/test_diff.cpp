#include <doctest.h>

#include <cmath>
#include <vector>

#include "facefit/diff.h"
#include "facefit/rng.h"

using namespace facefit;

namespace {

// Central finite difference of a scalar function evaluated without a tape.
template <class F>
double fd(F f, std::vector<double> x, std::size_t i, double h = 1e-6) {
  std::vector<double> xp = x, xm = x;
  xp[i] += h;
  xm[i] -= h;
  return (f(xp) - f(xm)) / (2.0 * h);
}

// Record f on a fresh tape at x and return (value, full gradient).
template <class F>
std::pair<double, std::vector<double>> grad(F f, const std::vector<double>& x) {
  Tape tape;
  Tape::Scope scope(tape);
  std::vector<DiffValue> xs;
  xs.reserve(x.size());
  for (double v : x) xs.push_back(DiffValue(v, tape.leaf()));
  DiffValue y = f(xs);
  std::vector<double> adj = tape.backward(y.id);
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = adj[xs[i].id];
  return {y.v, g};
}

}  // namespace

TEST_SUITE("diff") {

TEST_CASE("square value and derivative") {
  auto [v, g] = grad([](const std::vector<DiffValue>& x) { return x[0] * x[0]; }, {3.0});
  CHECK(v == 9.0);
  CHECK(g[0] == 6.0);
}

TEST_CASE("product partials") {
  auto [v, g] = grad([](const std::vector<DiffValue>& x) { return x[0] * x[1]; }, {5.0, 2.0});
  CHECK(v == 10.0);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 5.0);
}

TEST_CASE("every primitive op matches finite differences") {
  Rng rng(42);
  auto composite = [](const auto& x) {
    // Exercises +,-,*,/,neg,sqrt,exp,log,sin,cos,pow,sq,min,max,abs,clamp01.
    auto a = x[0], b = x[1], c = x[2];
    auto t1 = sin(a) * cos(b) + exp(c * 0.3);
    auto t2 = log(a + 3.0) / (b * b + 1.5);
    auto t3 = sqrt(a * a + b * b + 0.1) - pow(c + 2.0, 1.7);
    auto t4 = max(a, b) + min(b, c) + abs(c - a) + clamp01(a * 0.1);
    auto t5 = sq(t1) - t2 * t3;
    return t5 + t4 - (-t2);
  };
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x = {0.3 + rng.next_double(), 0.2 + rng.next_double(), rng.next_double()};
    auto [v, g] = grad(composite, x);
    auto plain = [&](const std::vector<double>& xv) {
      std::vector<DiffValue> xs(xv.begin(), xv.end());
      return composite(xs).v;
    };
    CHECK(v == plain(x));  // no-tape evaluation is bit-identical
    for (std::size_t i = 0; i < x.size(); ++i) {
      double n = fd(plain, x, i);
      CHECK(g[i] == doctest::Approx(n).epsilon(1e-6));
    }
  }
}

TEST_CASE("fused reductions match per-element ops") {
  Rng rng(7);
  std::vector<double> av(33), bv(33), wv(33);
  for (auto& v : av) v = rng.next_double() * 2 - 1;
  for (auto& v : bv) v = rng.next_double() * 2 - 1;
  for (auto& v : wv) v = rng.next_double() * 2 - 1;

  Tape tape;
  Tape::Scope scope(tape);
  std::vector<DiffValue> a, b;
  for (double v : av) a.push_back(DiffValue(v, tape.leaf()));
  for (double v : bv) b.push_back(DiffValue(v, tape.leaf()));

  DiffValue s = fsum(std::span<const DiffValue>(a));
  DiffValue d = fdot(std::span<const DiffValue>(a), std::span<const DiffValue>(b));
  DiffValue f = faffine(0.25, std::span<const double>(wv), std::span<const DiffValue>(a));
  DiffValue total = s + d * 2.0 + f;

  double expect = 0.25;
  for (std::size_t i = 0; i < av.size(); ++i) expect += av[i] + 2.0 * av[i] * bv[i] + wv[i] * av[i];
  CHECK(total.v == doctest::Approx(expect).epsilon(1e-12));

  std::vector<double> adj = tape.backward(total.id);
  for (std::size_t i = 0; i < av.size(); ++i) {
    CHECK(adj[a[i].id] == doctest::Approx(1.0 + 2.0 * bv[i] + wv[i]).epsilon(1e-12));
    CHECK(adj[b[i].id] == doctest::Approx(2.0 * av[i]).epsilon(1e-12));
  }
}

TEST_CASE("detach blocks gradient flow") {
  auto [v, g] = grad(
      [](const std::vector<DiffValue>& x) { return detach(x[0]) * x[0]; }, {4.0});
  CHECK(v == 16.0);
  CHECK(g[0] == 4.0);  // only the live factor contributes
}

TEST_CASE("pause scope records nothing") {
  Tape tape;
  Tape::Scope scope(tape);
  DiffValue x(2.0, tape.leaf());
  std::size_t before = tape.node_count();
  {
    Tape::Pause pause;
    DiffValue y = x * x + sin(x);
    CHECK(y.constant());
  }
  CHECK(tape.node_count() == before);
  DiffValue z = x * x;  // recording resumes after the pause
  CHECK_FALSE(z.constant());
}

TEST_CASE("non-finite intermediate raises a record error") {
  Tape tape;
  Tape::Scope scope(tape);
  DiffValue x(0.0, tape.leaf());
  CHECK_THROWS_AS((void)(DiffValue(1.0) / x), RecordError);
  try {
    (void)log(x);  // log(0) = -inf
    CHECK(false);
  } catch (const RecordError& e) {
    CHECK(!std::isfinite(e.bad_value));
    CHECK(e.node_id != kNoNode);
  }
}

TEST_CASE("constants never touch the tape") {
  Tape tape;
  Tape::Scope scope(tape);
  DiffValue a(1.5), b(2.5);
  DiffValue c = a * b + sin(a) / b;
  CHECK(c.constant());
  CHECK(tape.node_count() == 0);
}

TEST_CASE("backward on a constant loss returns all zeros") {
  Tape tape;
  Tape::Scope scope(tape);
  DiffValue x(3.0, tape.leaf());
  (void)(x * x);
  std::vector<double> adj = tape.backward(kNoNode);
  for (double a : adj) CHECK(a == 0.0);
}

TEST_CASE("gather maps block ids to adjoints and zeros constants") {
  Tape tape;
  Tape::Scope scope(tape);
  DiffValue x(2.0, tape.leaf());
  DiffValue y(5.0, tape.leaf());
  DiffValue loss = x * y;
  std::vector<double> adj = tape.backward(loss.id);
  std::vector<std::uint32_t> ids = {x.id, kNoNode, y.id};
  std::vector<double> g = gather(adj, ids);
  CHECK(g[0] == 5.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 2.0);
}

TEST_CASE("kink trace captures branch choices and detects flips") {
  Tape tape;
  Tape::Scope scope(tape);
  KinkTrace t1, t2;

  auto run = [&](double xv, KinkTrace& t) {
    Tape::kinks() = &t;
    t.arm();
    DiffValue x(xv, tape.leaf());
    DiffValue y = abs(x) + max(x, DiffValue(0.5)) + min(x, DiffValue(2.0));
    t.disarm();
    Tape::kinks() = nullptr;
    return y.v;
  };
  run(1.0, t1);
  CHECK(t1.size() == 3);
  run(1.2, t2);
  CHECK(t1 == t2);  // same side of every kink
  KinkTrace t3;
  run(0.3, t3);  // crosses the max(x, 0.5) branch
  CHECK(t1 != t3);
}

TEST_CASE("gradient accumulates through shared subexpressions") {
  // f = g*g with g = x + x shares the node for g; d/dx = 8x.
  auto [v, g] = grad(
      [](const std::vector<DiffValue>& x) {
        DiffValue s = x[0] + x[0];
        return s * s;
      },
      {1.5});
  CHECK(v == 9.0);
  CHECK(g[0] == 12.0);
}

TEST_CASE("tape clear resets node storage") {
  Tape tape;
  {
    Tape::Scope scope(tape);
    DiffValue x(1.0, tape.leaf());
    (void)(x + x);
  }
  CHECK(tape.node_count() > 0);
  tape.clear();
  CHECK(tape.node_count() == 0);
  CHECK(tape.edge_count() == 0);
}

}  // TEST_SUITE
