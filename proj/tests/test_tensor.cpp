#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "fusevid/grad_check.hpp"
#include "fusevid/tensor.hpp"
#include "fusevid/tensor_io.hpp"

using namespace fusevid;

namespace {

Tensor randn64(std::vector<std::size_t> shape, std::uint64_t seed, double stddev = 1.0) {
    Rng rng(seed);
    return Tensor::randn(std::move(shape), rng, stddev, DType::f64);
}

// Weighted sum so gradients are non-uniform across elements.
Tensor weighted_sum(const Tensor& t, std::uint64_t seed) {
    Rng rng(seed);
    Tensor w = Tensor::randn(t.shape(), rng, 1.0, t.dtype());
    return sum_all(mul(t, w));
}

}  // namespace

TEST_CASE("rng streams are reproducible and splittable") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    // A child stream depends only on (seed, label), not on the parent's
    // position, and distinct labels give distinct streams.
    Rng p1(7), p2(7);
    p2.next_u64();
    p2.next_u64();
    Rng c1 = p1.split("stream-a");
    Rng c2 = p2.split("stream-a");
    CHECK(c1.next_u64() == c2.next_u64());
    Rng c3 = p1.split("stream-b");
    CHECK(c1.next_u64() != c3.next_u64());

    Rng u(3);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }

    Rng g(11);
    double mean = 0.0, m2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = g.normal();
        mean += x;
        m2 += x * x;
    }
    mean /= n;
    m2 /= n;
    CHECK(std::fabs(mean) < 0.03);
    CHECK(std::fabs(m2 - 1.0) < 0.05);
}

TEST_CASE("tensor creation, access and dtype policing") {
    Tensor z = Tensor::zeros({2, 3}, DType::f32);
    CHECK(z.numel() == 6);
    CHECK(z.rank() == 2);
    CHECK(z.value_at(5) == 0.0);

    Tensor s = Tensor::scalar(2.5, DType::f64);
    CHECK(s.rank() == 0);
    CHECK(s.item() == 2.5);

    const std::vector<double> vals{1, 2, 3, 4, 5, 6};
    Tensor t = Tensor::from_values({2, 3}, vals, DType::f64);
    CHECK(t.value_at(4) == 5.0);
    CHECK_THROWS_AS(Tensor::from_values({2, 2}, vals, DType::f64), ShapeError);

    Tensor f32 = Tensor::zeros({2}, DType::f32);
    Tensor f64 = Tensor::zeros({2}, DType::f64);
    CHECK_THROWS_AS(add(f32, f64), DtypeError);
    CHECK_THROWS_AS(add(f32, Tensor::zeros({3}, DType::f32)), ShapeError);
    CHECK_THROWS_AS(t.item(), ShapeError);
}

TEST_CASE("op forward values match hand-computed results") {
    const std::vector<double> av{1, 2, 3, 4};
    const std::vector<double> bv{5, 6, 7, 8};
    Tensor a = Tensor::from_values({2, 2}, av, DType::f64);
    Tensor b = Tensor::from_values({2, 2}, bv, DType::f64);

    Tensor c = matmul(a, b);
    CHECK(c.value_at(0) == 19.0);
    CHECK(c.value_at(1) == 22.0);
    CHECK(c.value_at(2) == 43.0);
    CHECK(c.value_at(3) == 50.0);

    Tensor tr = transpose(a);
    CHECK(tr.value_at(1) == 3.0);
    CHECK(tr.value_at(2) == 2.0);

    CHECK(sum_all(a).item() == 10.0);
    CHECK(mean_all(a).item() == 2.5);
    CHECK(var_all(a).item() == doctest::Approx(1.25).epsilon(1e-15));

    Tensor sm = softmax_rows(Tensor::from_values({1, 4}, std::vector<double>{0, 0, 0, 0}, DType::f64));
    for (int i = 0; i < 4; ++i) CHECK(sm.value_at(i) == doctest::Approx(0.25).epsilon(1e-15));

    Tensor ln = layer_norm(Tensor::from_values({1, 4}, av, DType::f64), 1e-5);
    double m = 0, v = 0;
    for (int i = 0; i < 4; ++i) m += ln.value_at(i);
    for (int i = 0; i < 4; ++i) v += ln.value_at(i) * ln.value_at(i);
    CHECK(std::fabs(m / 4) < 1e-12);
    CHECK(v / 4 == doctest::Approx(1.0).epsilon(1e-4));

    Tensor cat0 = concat({a, b}, 0);
    CHECK(cat0.shape() == std::vector<std::size_t>{4, 2});
    CHECK(cat0.value_at(4) == 5.0);
    Tensor cat1 = concat({a, b}, 1);
    CHECK(cat1.shape() == std::vector<std::size_t>{2, 4});
    CHECK(cat1.value_at(2) == 5.0);
    CHECK(cat1.value_at(4) == 3.0);

    Tensor sr = slice_rows(cat0, 1, 2);
    CHECK(sr.value_at(0) == 3.0);
    Tensor sc = slice_cols(cat1, 2, 2);
    CHECK(sc.value_at(0) == 5.0);
    CHECK(sc.value_at(2) == 7.0);

    Tensor vvec = Tensor::from_values({2}, std::vector<double>{10, 20}, DType::f64);
    Tensor br = broadcast_rows(vvec, 3);
    CHECK(br.shape() == std::vector<std::size_t>{3, 2});
    CHECK(br.value_at(5) == 20.0);
    Tensor mor = mean_over_rows(a);
    CHECK(mor.value_at(0) == 2.0);
    CHECK(mor.value_at(1) == 3.0);
    CHECK(add_rowvec(a, vvec).value_at(3) == 24.0);
    CHECK(mul_rowvec(a, vvec).value_at(2) == 30.0);
}

TEST_CASE("backward accumulates and doubles across repeated calls") {
    Tensor x = randn64({3, 3}, 5);
    x.set_requires_grad(true);
    Tensor loss = mean_all(mul(x, x));
    loss.backward();
    std::vector<double> g1(x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) g1[i] = x.grad_at(i);
    loss.backward();
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad_at(i) == 2.0 * g1[i]);

    x.zero_grad();
    CHECK_FALSE(x.has_grad());

    CHECK_THROWS_AS(mul(x, x).backward(), ShapeError);  // non-scalar
    Tensor y = Tensor::zeros({2}, DType::f64);
    CHECK_THROWS_AS(sum_all(y).backward(), ParamError);  // no grad anywhere
}

TEST_CASE("gradients match finite differences for every op") {
    const double tol = 1e-6;

    auto check = [&](const char* name, const std::function<Tensor(const Tensor&)>& f,
                     const Tensor& x) {
        const GradReport r = grad_check(f, x, 1e-5);
        INFO(name, ": max rel err ", r.max_relative_error, " at ", r.worst_index);
        CHECK(r.max_relative_error < tol);
    };

    Tensor x22 = randn64({2, 2}, 11);
    Tensor x34 = randn64({3, 4}, 12);
    Tensor aux34 = randn64({3, 4}, 13);
    Tensor x43 = randn64({4, 3}, 14);
    Tensor v4 = randn64({4}, 15);

    check("add", [&](const Tensor& x) { return weighted_sum(add(x, aux34), 21); }, x34);
    check("sub", [&](const Tensor& x) { return weighted_sum(sub(aux34, x), 22); }, x34);
    check("mul", [&](const Tensor& x) { return weighted_sum(mul(x, aux34), 23); }, x34);
    check("scalar_mul", [&](const Tensor& x) { return weighted_sum(scalar_mul(x, -1.7), 24); }, x34);
    check("add_scalar", [&](const Tensor& x) { return weighted_sum(add_scalar(x, 0.3), 25); }, x34);
    check("matmul lhs", [&](const Tensor& x) { return weighted_sum(matmul(x, x43), 26); }, x34);
    check("matmul rhs", [&](const Tensor& x) { return weighted_sum(matmul(x34, x), 27); }, x43);
    check("transpose", [&](const Tensor& x) { return weighted_sum(transpose(x), 28); }, x34);
    check("reshape", [&](const Tensor& x) { return weighted_sum(reshape(x, {2, 6}), 29); }, x34);
    check("concat axis0",
          [&](const Tensor& x) { return weighted_sum(concat({x, aux34}, 0), 30); }, x34);
    check("concat axis1",
          [&](const Tensor& x) { return weighted_sum(concat({aux34, x}, 1), 31); }, x34);
    check("slice_rows", [&](const Tensor& x) { return weighted_sum(slice_rows(x, 1, 2), 32); }, x34);
    check("slice_cols", [&](const Tensor& x) { return weighted_sum(slice_cols(x, 1, 2), 33); }, x34);
    check("sum_all", [&](const Tensor& x) { return sum_all(x); }, x34);
    check("mean_all", [&](const Tensor& x) { return mean_all(x); }, x34);
    check("var_all", [&](const Tensor& x) { return var_all(x); }, x34);
    check("layer_norm",
          [&](const Tensor& x) { return weighted_sum(layer_norm(x, 1e-5), 34); }, x34);
    check("softmax", [&](const Tensor& x) { return weighted_sum(softmax_rows(x), 35); }, x34);
    check("gelu", [&](const Tensor& x) { return weighted_sum(gelu(x), 36); }, x34);
    check("broadcast_rows",
          [&](const Tensor& x) { return weighted_sum(broadcast_rows(x, 5), 37); }, v4);
    check("mean_over_rows",
          [&](const Tensor& x) { return weighted_sum(mean_over_rows(x), 38); }, x34);
    check("add_rowvec lhs",
          [&](const Tensor& x) { return weighted_sum(add_rowvec(x, v4), 39); }, x34);
    check("add_rowvec rhs",
          [&](const Tensor& x) { return weighted_sum(add_rowvec(x34, x), 40); }, v4);
    check("mul_rowvec rhs",
          [&](const Tensor& x) { return weighted_sum(mul_rowvec(x34, x), 41); }, v4);
    check("composite",
          [&](const Tensor& x) {
              Tensor h = gelu(matmul(x, x43));
              return mean_all(mul(softmax_rows(layer_norm(h, 1e-5)), h));
          },
          x34);
    (void)x22;
}

TEST_CASE("grad_check rejects bad inputs") {
    Tensor xf = Tensor::zeros({2}, DType::f32);
    CHECK_THROWS_AS(grad_check([](const Tensor& t) { return sum_all(t); }, xf), PrecisionError);

    Tensor x = randn64({2}, 1);
    CHECK_THROWS_AS(grad_check(
                        [](const Tensor& t) {
                            return scalar_mul(sum_all(t), std::numeric_limits<double>::infinity());
                        },
                        x),
                    EvalError);
    CHECK_THROWS_AS(grad_check([](const Tensor& t) { return sum_all(t); }, x, 0.0), ParamError);
}

TEST_CASE("tensor files round-trip bit-exactly") {
    Rng rng(99);
    const char* path = "roundtrip.mtf";

    for (DType dt : {DType::f32, DType::f64}) {
        Tensor t = Tensor::randn({3, 4, 5}, rng, 2.0, dt);
        write_tensor(path, t);
        Tensor u = read_tensor(path);
        CHECK(u.shape() == t.shape());
        CHECK(u.dtype() == t.dtype());
        if (dt == DType::f32) {
            CHECK(std::memcmp(t.data<float>().data(), u.data<float>().data(),
                              t.numel() * sizeof(float)) == 0);
        } else {
            CHECK(std::memcmp(t.data<double>().data(), u.data<double>().data(),
                              t.numel() * sizeof(double)) == 0);
        }
    }

    // Rank-0 scalars and empty tensors are valid files.
    write_tensor(path, Tensor::scalar(-7.25, DType::f64));
    CHECK(read_tensor(path).item() == -7.25);
    write_tensor(path, Tensor::zeros({0}, DType::f32));
    Tensor e = read_tensor(path);
    CHECK(e.shape() == std::vector<std::size_t>{0});
    CHECK(e.numel() == 0);

    std::filesystem::remove(path);
}

TEST_CASE("tensor file header violations are rejected with offsets") {
    Tensor t = Tensor::from_values({2}, std::vector<double>{1, 2}, DType::f32);
    auto good = tensor_to_bytes(t);

    auto bad = good;
    bad[0] = 'X';
    CHECK_THROWS_AS(tensor_from_bytes(bad), FormatError);

    bad = good;
    bad[4] = 9;  // unknown dtype code
    CHECK_THROWS_AS(tensor_from_bytes(bad), FormatError);

    bad = good;
    bad[6] = 1;  // reserved byte
    CHECK_THROWS_AS(tensor_from_bytes(bad), FormatError);

    bad = good;
    bad.pop_back();  // truncated payload
    CHECK_THROWS_AS(tensor_from_bytes(bad), FormatError);

    bad = good;
    bad.push_back(0);  // trailing byte
    CHECK_THROWS_AS(tensor_from_bytes(bad), FormatError);

    CHECK_THROWS_AS(tensor_from_bytes(std::vector<std::uint8_t>{'M', 'T'}), FormatError);

    // Error messages carry a byte offset.
    try {
        bad = good;
        bad.push_back(0);
        tensor_from_bytes(bad);
        CHECK(false);
    } catch (const FormatError& err) {
        CHECK(std::string(err.what()).find("byte") != std::string::npos);
    }
}
