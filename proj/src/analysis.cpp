#include "fusevid/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "fusevid/errors.hpp"
#include "fusevid/textcond.hpp"

namespace fusevid {
namespace {

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IngestError("analysis: cannot write '" + path + "'");
    return out;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

// Dominant eigenvector of a symmetric matrix by power iteration. The start
// vector is a fixed generic direction, so results are deterministic.
std::vector<double> power_iteration(const std::vector<double>& m,
                                    std::size_t d, double& eigenvalue) {
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i)
        v[i] = 1.0 + 1e-3 * static_cast<double>(i);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;

    std::vector<double> next(d);
    for (int iter = 0; iter < 500; ++iter) {
        for (std::size_t i = 0; i < d; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += m[i * d + j] * v[j];
            next[i] = acc;
        }
        double n2 = 0.0;
        for (double x : next) n2 += x * x;
        n2 = std::sqrt(n2);
        if (n2 == 0.0) break;  // zero matrix: keep the start direction
        for (std::size_t i = 0; i < d; ++i) v[i] = next[i] / n2;
    }
    eigenvalue = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += m[i * d + j] * v[j];
        eigenvalue += v[i] * acc;
    }
    // First nonzero loading positive.
    for (std::size_t i = 0; i < d; ++i) {
        if (std::fabs(v[i]) > 1e-12) {
            if (v[i] < 0.0)
                for (double& x : v) x = -x;
            break;
        }
    }
    return v;
}

}  // namespace

Histogram value_histogram(const Tensor& tokens, std::size_t bins, double lo,
                          double hi) {
    if (bins < 1) throw ParamError("histogram: bins must be >= 1");
    if (!(lo < hi)) throw ParamError("histogram: range must satisfy lo < hi");
    if (tokens.numel() == 0) throw ParamError("histogram: empty input");

    Histogram h;
    h.bin_edges.resize(bins + 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i <= bins; ++i)
        h.bin_edges[i] = lo + width * static_cast<double>(i);
    h.counts.assign(bins, 0);
    for (std::size_t i = 0; i < tokens.numel(); ++i) {
        const double x = tokens.value_at(i);
        double pos = std::floor((x - lo) / width);
        if (pos < 0.0) pos = 0.0;
        if (pos > static_cast<double>(bins - 1))
            pos = static_cast<double>(bins - 1);
        ++h.counts[static_cast<std::size_t>(pos)];
    }
    h.total = tokens.numel();
    return h;
}

double histogram_mass(const Histogram& h, double lo, double hi) {
    if (h.total == 0) return 0.0;
    std::size_t inside = 0;
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        if (h.bin_edges[i] >= lo - 1e-12 && h.bin_edges[i + 1] <= hi + 1e-12)
            inside += h.counts[i];
    return static_cast<double>(inside) / static_cast<double>(h.total);
}

Projection2D project_2d(
    const std::vector<std::pair<std::string, Tensor>>& token_sets) {
    if (token_sets.empty()) throw ParamError("projection: no token sets");
    const std::size_t d = token_sets[0].second.shape().back();
    std::size_t n = 0;
    for (const auto& [label, t] : token_sets) {
        if (t.rank() != 2)
            throw ShapeError("projection: set '" + label +
                             "' must be rank 2, got " +
                             shape_to_string(t.shape()));
        if (t.shape()[1] != d)
            throw ShapeError("projection: set '" + label + "' has width " +
                             std::to_string(t.shape()[1]) +
                             ", expected " + std::to_string(d));
        n += t.shape()[0];
    }
    if (n < 3) throw ParamError("projection: need at least 3 tokens");

    std::vector<double> rows(n * d);
    std::vector<const std::string*> labels(n);
    std::size_t r = 0;
    for (const auto& [label, t] : token_sets)
        for (std::size_t i = 0; i < t.shape()[0]; ++i, ++r) {
            labels[r] = &label;
            for (std::size_t j = 0; j < d; ++j)
                rows[r * d + j] = t.value_at(i * d + j);
        }

    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += rows[i * d + j];
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) rows[i * d + j] -= mean[j];

    std::vector<double> cov(d * d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a) {
            const double xa = rows[i * d + a];
            for (std::size_t b = 0; b < d; ++b)
                cov[a * d + b] += xa * rows[i * d + b];
        }
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    for (double& c : cov) c /= denom;

    double l1 = 0.0;
    const std::vector<double> v1 = power_iteration(cov, d, l1);
    std::vector<double> deflated = cov;
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
            deflated[a * d + b] -= l1 * v1[a] * v1[b];
    double l2 = 0.0;
    const std::vector<double> v2 = power_iteration(deflated, d, l2);

    Projection2D proj;
    proj.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = 0.0, y = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            x += rows[i * d + j] * v1[j];
            y += rows[i * d + j] * v2[j];
        }
        proj.points[i] = {x, y, *labels[i]};
    }
    return proj;
}

FluctuationReport fluctuation_stats(std::string_view prompt, std::size_t d,
                                    const std::vector<std::uint64_t>& seeds) {
    if (seeds.size() < 2)
        throw ParamError("fluctuation: need at least 2 repeats");

    std::vector<DecoderTokens> reps;
    reps.reserve(seeds.size());
    for (std::uint64_t s : seeds)
        reps.push_back(encode_prompt_decoder(prompt, d, s));

    auto max_var = [&](auto pick) {
        const Tensor& first = pick(reps[0]);
        const std::size_t elems = first.numel();
        const double k = static_cast<double>(reps.size());
        double worst = 0.0;
        for (std::size_t e = 0; e < elems; ++e) {
            double sum = 0.0;
            for (const DecoderTokens& rep : reps) sum += pick(rep).value_at(e);
            const double mean = sum / k;
            double acc = 0.0;
            for (const DecoderTokens& rep : reps) {
                const double diff = pick(rep).value_at(e) - mean;
                acc += diff * diff;
            }
            worst = std::max(worst, acc / k);
        }
        return worst;
    };

    FluctuationReport report;
    report.query_var = max_var([](const DecoderTokens& r) -> const Tensor& {
        return r.query;
    });
    report.answer_var = max_var([](const DecoderTokens& r) -> const Tensor& {
        return r.answer;
    });
    return report;
}

void write_histogram_csv(const std::string& path, const Histogram& h) {
    std::ofstream out = open_out(path);
    out << "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out << fmt(h.bin_edges[i]) << "," << fmt(h.bin_edges[i + 1]) << ","
            << h.counts[i] << "\n";
}

void write_histogram_svg(const std::string& path, const Histogram& h) {
    const double W = 640, H = 360, ml = 50, mb = 30, mt = 10, mr = 10;
    std::size_t peak = 1;
    for (std::size_t c : h.counts) peak = std::max(peak, c);
    std::ofstream out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\">\n";
    const double plot_w = W - ml - mr, plot_h = H - mt - mb;
    const double bw = plot_w / static_cast<double>(h.counts.size());
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const double bh =
            plot_h * static_cast<double>(h.counts[i]) / static_cast<double>(peak);
        out << "<rect x=\"" << fmt(ml + bw * static_cast<double>(i))
            << "\" y=\"" << fmt(mt + plot_h - bh) << "\" width=\""
            << fmt(bw * 0.92) << "\" height=\"" << fmt(bh)
            << "\" fill=\"#4477aa\"/>\n";
    }
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\""
        << W - mr << "\" y2=\"" << mt + plot_h
        << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << ml << "\" y=\"" << H - 8
        << "\" font-size=\"12\">" << fmt(h.bin_edges.front()) << "</text>\n";
    out << "<text x=\"" << W - mr - 40 << "\" y=\"" << H - 8
        << "\" font-size=\"12\">" << fmt(h.bin_edges.back()) << "</text>\n";
    out << "<text x=\"4\" y=\"" << mt + 12 << "\" font-size=\"12\">"
        << peak << "</text>\n";
    out << "</svg>\n";
}

void write_projection_csv(const std::string& path, const Projection2D& p) {
    std::ofstream out = open_out(path);
    out << "x,y,label\n";
    for (const ProjectedPoint& pt : p.points)
        out << fmt(pt.x) << "," << fmt(pt.y) << "," << pt.label << "\n";
}

void write_projection_svg(const std::string& path, const Projection2D& p) {
    static const char* palette[] = {"#4477aa", "#ee6677", "#228833",
                                    "#ccbb44", "#66ccee", "#aa3377"};
    const double W = 480, H = 480, m = 30;
    double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
    if (!p.points.empty()) {
        xlo = xhi = p.points[0].x;
        ylo = yhi = p.points[0].y;
        for (const ProjectedPoint& pt : p.points) {
            xlo = std::min(xlo, pt.x), xhi = std::max(xhi, pt.x);
            ylo = std::min(ylo, pt.y), yhi = std::max(yhi, pt.y);
        }
    }
    if (xhi == xlo) xhi = xlo + 1;
    if (yhi == ylo) yhi = ylo + 1;
    std::vector<std::string> seen;
    auto color_of = [&](const std::string& label) {
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (seen[i] == label) return palette[i % 6];
        seen.push_back(label);
        return palette[(seen.size() - 1) % 6];
    };
    std::ofstream out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\">\n";
    for (const ProjectedPoint& pt : p.points) {
        const double px = m + (W - 2 * m) * (pt.x - xlo) / (xhi - xlo);
        const double py = H - m - (H - 2 * m) * (pt.y - ylo) / (yhi - ylo);
        out << "<circle cx=\"" << fmt(px) << "\" cy=\"" << fmt(py)
            << "\" r=\"3\" fill=\"" << color_of(pt.label) << "\"/>\n";
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        out << "<text x=\"8\" y=\"" << 16 + 16 * i
            << "\" font-size=\"12\" fill=\"" << palette[i % 6] << "\">"
            << xml_escape(seen[i]) << "</text>\n";
    out << "</svg>\n";
}

void write_fluctuation_csv(const std::string& path,
                           const FluctuationReport& r) {
    std::ofstream out = open_out(path);
    out << "set,max_var\n";
    out << "query," << fmt(r.query_var) << "\n";
    out << "answer," << fmt(r.answer_var) << "\n";
}

void write_fluctuation_svg(const std::string& path,
                           const FluctuationReport& r) {
    const double W = 320, H = 240, m = 40;
    const double peak = std::max({r.query_var, r.answer_var, 1e-12});
    std::ofstream out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\">\n";
    const double vals[2] = {r.query_var, r.answer_var};
    const char* names[2] = {"query", "answer"};
    for (int i = 0; i < 2; ++i) {
        const double bh = (H - 2 * m) * vals[i] / peak;
        const double x = m + i * (W - 2 * m) / 2.0 + 20;
        out << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(H - m - bh)
            << "\" width=\"60\" height=\"" << fmt(bh)
            << "\" fill=\"#4477aa\"/>\n";
        out << "<text x=\"" << fmt(x) << "\" y=\"" << H - m + 16
            << "\" font-size=\"12\">" << names[i] << "</text>\n";
        out << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(H - m - bh - 4)
            << "\" font-size=\"10\">" << fmt(vals[i]) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace fusevid
