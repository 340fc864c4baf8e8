#pragma once

// Independent reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "lesiongrade/grader.hpp"
#include "lesiongrade/mask_io.hpp"
#include "lesiongrade/random.hpp"
#include "lesiongrade/regions.hpp"

namespace oracle {

// Explicit-stack flood fill, 8-neighbourhood. Returns region sizes, sorted.
inline std::vector<std::size_t> flood_fill_sizes(const lesiongrade::LesionMask& m) {
    const std::size_t w = m.width(), h = m.height();
    std::vector<char> seen(w * h, 0);
    std::vector<std::size_t> sizes;
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            if (!m.at(r, c) || seen[r * w + c]) continue;
            std::size_t n = 0;
            stack.push_back({r, c});
            seen[r * w + c] = 1;
            while (!stack.empty()) {
                auto [y, x] = stack.back();
                stack.pop_back();
                ++n;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const long ny = static_cast<long>(y) + dy, nx = static_cast<long>(x) + dx;
                        if (ny < 0 || nx < 0 || ny >= static_cast<long>(h) || nx >= static_cast<long>(w)) continue;
                        const std::size_t idx = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
                        if (seen[idx] || !m.pixels()[idx]) continue;
                        seen[idx] = 1;
                        stack.push_back({static_cast<std::size_t>(ny), static_cast<std::size_t>(nx)});
                    }
            }
            sizes.push_back(n);
        }
    std::sort(sizes.begin(), sizes.end());
    return sizes;
}

inline std::vector<std::size_t> sorted_sizes(const lesiongrade::RegionSet& set) {
    std::vector<std::size_t> out;
    for (const auto& r : set.regions) out.push_back(r.size);
    std::sort(out.begin(), out.end());
    return out;
}

inline lesiongrade::LesionMask random_mask(lesiongrade::Rng& rng, std::size_t w, std::size_t h, double density) {
    lesiongrade::LesionMask m(w, h, lesiongrade::LesionClass::HE);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) m.set(r, c, rng.bernoulli(density));
    return m;
}

// Plain matrix-chain inference: relu(W x + b) per trunk layer, then both heads.
struct Logits {
    std::vector<double> dr, dme;
};

inline std::vector<double> affine(const lesiongrade::DenseLayer& L, const std::vector<double>& x) {
    std::vector<double> y(L.outputs);
    for (std::size_t o = 0; o < L.outputs; ++o) {
        double s = L.bias[o];
        for (std::size_t i = 0; i < L.inputs; ++i) s += L.weights[o * L.inputs + i] * x[i];
        y[o] = s;
    }
    return y;
}

inline Logits chain(const lesiongrade::GraderModel& m, std::vector<double> x) {
    for (const auto& L : m.trunk) {
        x = affine(L, x);
        for (auto& v : x) v = std::max(0.0, v);
    }
    return {affine(m.dr_head, x), affine(m.dme_head, x)};
}

// -log p(label) per head via log-sum-exp, capped where the loss clamps p at 1e-12.
inline double cross_entropy(const Logits& z, const lesiongrade::GradePair& y) {
    auto nll = [](const std::vector<double>& v, int label) {
        const double mx = *std::max_element(v.begin(), v.end());
        double s = 0;
        for (double x : v) s += std::exp(x - mx);
        return std::min(mx + std::log(s) - v[static_cast<std::size_t>(label)], -std::log(1e-12));
    };
    return nll(z.dr, y.dr) + nll(z.dme, y.dme);
}

// Central differences of the summed loss against backward_input, inference
// mode. A parameter fails when its error exceeds both the absolute floor and
// the relative tolerance; worst_rel is over entries larger than the floor.
// Parameters whose +-h perturbation changes which trunk units are active
// straddle a ReLU kink, where central differences do not estimate the
// derivative; they are counted in `kinks`.
struct GradCheck {
    std::size_t params = 0;
    std::size_t failures = 0;
    std::size_t kinks = 0;
    double worst_rel = 0.0;
};

inline std::vector<bool> activation_pattern(const lesiongrade::GraderModel& m, const std::vector<double>& x) {
    auto tr = lesiongrade::forward_trace(m, x, false, nullptr);
    std::vector<bool> p;
    for (const auto& layer : tr.pre)
        for (double v : layer) p.push_back(v > 0);
    return p;
}

inline GradCheck check_gradients(lesiongrade::GraderModel m, const std::vector<double>& x,
                                 const lesiongrade::GradePair& y, double h = 1e-4, double rel_tol = 1e-4,
                                 double abs_floor = 1e-6) {
    using namespace lesiongrade;
    Gradients g = Gradients::like(m);
    backward_input(m, x, y, false, nullptr, g);
    std::vector<double> analytic;
    for_each_parameter(g, [&](double& v) { analytic.push_back(v); });

    auto f = [&] {
        auto out = forward_input(m, x, false, nullptr);
        return loss(out.dr_probs, out.dme_probs, y);
    };
    GradCheck r;
    std::size_t k = 0;
    for_each_parameter(m, [&](double& p) {
        const double saved = p;
        p = saved + h;
        const double up = f();
        const auto pattern_up = activation_pattern(m, x);
        p = saved - h;
        const double down = f();
        const bool kink = activation_pattern(m, x) != pattern_up;
        p = saved;
        const double numeric = (up - down) / (2 * h);
        const double a = analytic[k++];
        const double diff = std::abs(a - numeric);
        ++r.params;
        r.kinks += kink;
        const double scale = std::max(std::abs(a), std::abs(numeric));
        if (scale > abs_floor) r.worst_rel = std::max(r.worst_rel, diff / scale);
        if (diff > abs_floor && diff / scale > rel_tol) ++r.failures;
    });
    return r;
}

inline lesiongrade::GraderModel random_model(lesiongrade::Rng& rng, lesiongrade::FeatureMode mode,
                                             std::vector<std::size_t> dims) {
    auto m = lesiongrade::GraderModel::zeros(mode, std::move(dims));
    for_each_parameter(m, [&](double& p) { p = rng.uniform(-0.8, 0.8); });
    return m;
}

inline std::vector<double> random_input(lesiongrade::Rng& rng, std::size_t n) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-2.0, 2.0);
    return x;
}

// Scratch directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("lg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

inline void spit(const std::filesystem::path& p, const std::string& data) {
    std::ofstream out(p, std::ios::binary);
    out << data;
}

}  // namespace oracle
