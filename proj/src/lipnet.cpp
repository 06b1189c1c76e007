#include "neemo/lipnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "neemo/error.hpp"

namespace neemo::lipnet {

namespace {

enum class RowNorm { L1, L2, LInf };

RowNorm row_norm_kind(const DenseLayer& layer) {
    if (!layer.is_first) return RowNorm::L1;
    switch (layer.input_norm) {
        case NormP::One: return RowNorm::LInf;
        case NormP::Two: return RowNorm::L2;
        case NormP::Inf: return RowNorm::L1;
    }
    return RowNorm::L1;
}

double row_norm(const Eigen::MatrixXd& W, Eigen::Index r, RowNorm kind) {
    switch (kind) {
        case RowNorm::L1: return W.row(r).cwiseAbs().sum();
        case RowNorm::L2: return std::sqrt(W.row(r).squaredNorm());
        case RowNorm::LInf: {
            double m = 0.0;
            for (Eigen::Index j = 0; j < W.cols(); ++j) m = std::max(m, std::abs(W(r, j)));
            return m;
        }
    }
    return 0.0;
}

// d(row norm)/d(W(r, :)), with abs'(0) = +1 and first-index tie-break for max.
Eigen::RowVectorXd row_norm_grad(const Eigen::MatrixXd& W, Eigen::Index r, RowNorm kind, double norm) {
    Eigen::RowVectorXd d = Eigen::RowVectorXd::Zero(W.cols());
    switch (kind) {
        case RowNorm::L1:
            for (Eigen::Index j = 0; j < W.cols(); ++j) d(j) = W(r, j) >= 0.0 ? 1.0 : -1.0;
            break;
        case RowNorm::L2:
            if (norm > 0.0) d = W.row(r) / norm;
            break;
        case RowNorm::LInf: {
            Eigen::Index best = 0;
            for (Eigen::Index j = 1; j < W.cols(); ++j)
                if (std::abs(W(r, j)) > std::abs(W(r, best))) best = j;
            d(best) = W(r, best) >= 0.0 ? 1.0 : -1.0;
            break;
        }
    }
    return d;
}

// Largest row norm; ties go to the earliest row.
std::pair<double, Eigen::Index> max_row_norm(const Eigen::MatrixXd& W, RowNorm kind) {
    double best = row_norm(W, 0, kind);
    Eigen::Index arg = 0;
    for (Eigen::Index r = 1; r < W.rows(); ++r) {
        const double n = row_norm(W, r, kind);
        if (n > best) {
            best = n;
            arg = r;
        }
    }
    return {best, arg};
}

// Maps the gradient w.r.t. effective weights back to raw weights.
Eigen::MatrixXd pullback_projection(const Eigen::MatrixXd& W, const Eigen::MatrixXd& g_eff, RowNorm kind,
                                    Projection projection) {
    if (projection == Projection::Whole) {
        const auto [n, r] = max_row_norm(W, kind);
        if (!(n > 1.0)) return g_eff;
        Eigen::MatrixXd g = g_eff / n;
        const double inner = (g_eff.array() * W.array()).sum();
        g.row(r) -= (inner / (n * n)) * row_norm_grad(W, r, kind, n);
        return g;
    }
    Eigen::MatrixXd g = g_eff;
    const bool unit = projection == Projection::UnitRow;
    const double floor = unit ? kUnitRowFloor : 1.0;
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
        const double n = row_norm(W, r, kind);
        if (!(n > floor)) {
            if (unit) g.row(r) /= kUnitRowFloor;
            continue;
        }
        const double inner = g_eff.row(r).dot(W.row(r));
        g.row(r) = g_eff.row(r) / n - (inner / (n * n)) * row_norm_grad(W, r, kind, n);
    }
    return g;
}

// Sorts each group of every column in place; perm(i, k) is the source row of output row i.
void group_sort_columns(Eigen::MatrixXd& Z, Eigen::MatrixXi* perm, int g) {
    const Eigen::Index rows = Z.rows();
    if (perm != nullptr) perm->resize(rows, Z.cols());
    std::vector<int> idx(static_cast<std::size_t>(g));
    std::vector<double> tmp(static_cast<std::size_t>(g));
    for (Eigen::Index k = 0; k < Z.cols(); ++k) {
        double* col = Z.col(k).data();
        for (Eigen::Index start = 0; start < rows; start += g) {
            if (g == 2) {
                const bool swap = col[start] > col[start + 1];
                if (swap) std::swap(col[start], col[start + 1]);
                if (perm != nullptr) {
                    (*perm)(start, k) = static_cast<int>(start + (swap ? 1 : 0));
                    (*perm)(start + 1, k) = static_cast<int>(start + (swap ? 0 : 1));
                }
                continue;
            }
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return col[start + a] < col[start + b]; });
            for (int i = 0; i < g; ++i) tmp[i] = col[start + idx[i]];
            for (int i = 0; i < g; ++i) {
                col[start + i] = tmp[i];
                if (perm != nullptr) (*perm)(start + i, k) = static_cast<int>(start + idx[i]);
            }
        }
    }
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& W) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < W.cols(); ++c) row.push_back(W(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

NormP parse_norm(const std::string& s) {
    if (s == "1") return NormP::One;
    if (s == "2") return NormP::Two;
    if (s == "inf" || s == "infinity") return NormP::Inf;
    throw ConfigError("unknown input norm '" + s + "' (expected 1, 2 or inf)");
}

std::string to_string(NormP p) {
    switch (p) {
        case NormP::One: return "1";
        case NormP::Two: return "2";
        case NormP::Inf: return "inf";
    }
    return "?";
}

Projection parse_projection(const std::string& s) {
    if (s == "whole") return Projection::Whole;
    if (s == "per-row") return Projection::PerRow;
    if (s == "unit-row") return Projection::UnitRow;
    throw ConfigError("unknown projection '" + s + "' (expected whole, per-row or unit-row)");
}

std::string to_string(Projection p) {
    switch (p) {
        case Projection::Whole: return "whole";
        case Projection::PerRow: return "per-row";
        case Projection::UnitRow: return "unit-row";
    }
    return "?";
}

std::vector<double> group_sort(std::span<const double> v, int group_size) {
    if (group_size < 1 || v.size() % static_cast<std::size_t>(group_size) != 0) {
        throw ConfigError("group_sort: length " + std::to_string(v.size()) + " not divisible by group size " +
                          std::to_string(group_size));
    }
    std::vector<double> out(v.begin(), v.end());
    for (std::size_t s = 0; s < out.size(); s += static_cast<std::size_t>(group_size))
        std::sort(out.begin() + static_cast<std::ptrdiff_t>(s),
                  out.begin() + static_cast<std::ptrdiff_t>(s + static_cast<std::size_t>(group_size)));
    return out;
}

double op_norm_inf_inf(const Eigen::MatrixXd& W) { return W.cwiseAbs().rowwise().sum().maxCoeff(); }

double op_norm_p_inf(const Eigen::MatrixXd& W, NormP p) {
    switch (p) {
        case NormP::Two: return W.rowwise().norm().maxCoeff();
        case NormP::One: return W.cwiseAbs().maxCoeff();
        case NormP::Inf: return op_norm_inf_inf(W);
    }
    return 0.0;
}

double layer_norm(const DenseLayer& layer) {
    return layer.is_first ? op_norm_p_inf(layer.W, layer.input_norm) : op_norm_inf_inf(layer.W);
}

DenseLayer constrain_weights(DenseLayer layer, Projection projection) {
    // a few ulp of slack so that a rescaled matrix is left alone on the next pass
    constexpr double kSlack = 1.0 + 8.0 * std::numeric_limits<double>::epsilon();
    const auto kind = row_norm_kind(layer);
    if (projection == Projection::Whole) {
        const double n = max_row_norm(layer.W, kind).first;
        if (n > kSlack) layer.W /= n;
        return layer;
    }
    const bool unit = projection == Projection::UnitRow;
    for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
        const double n = row_norm(layer.W, r, kind);
        if (unit) {
            layer.W.row(r) /= std::max(n, kUnitRowFloor);
        } else if (n > kSlack) {
            layer.W.row(r) /= n;
        }
    }
    return layer;
}

void Architecture::validate() const {
    if (input_dim < 1) throw ConfigError("lipnet: input_dim must be positive");
    if (group_size < 1) throw ConfigError("lipnet: group_size must be positive");
    for (int w : hidden) {
        if (w < 1 || w % group_size != 0)
            throw ConfigError("lipnet: hidden width " + std::to_string(w) + " not divisible by group size " +
                              std::to_string(group_size));
    }
}

LipschitzMLP::LipschitzMLP(Architecture arch, std::vector<DenseLayer> layers)
    : arch_(std::move(arch)), layers_(std::move(layers)) {
    arch_.validate();
    if (layers_.size() != arch_.hidden.size() + 1) throw ConfigError("lipnet: layer count does not match widths");
    int in = arch_.input_dim;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const int out = l < arch_.hidden.size() ? arch_.hidden[l] : 1;
        auto& layer = layers_[l];
        if (layer.W.rows() != out || layer.W.cols() != in || layer.b.size() != out)
            throw ConfigError("lipnet: layer " + std::to_string(l) + " has wrong shape");
        if (!layer.W.allFinite() || !layer.b.allFinite())
            throw NumericalError("lipnet: layer " + std::to_string(l) + " has non-finite entries");
        layer.is_first = l == 0;
        layer.input_norm = arch_.input_norm;
        in = out;
    }
}

LipschitzMLP LipschitzMLP::zeros(const Architecture& arch) {
    arch.validate();
    std::vector<DenseLayer> layers;
    int in = arch.input_dim;
    for (std::size_t l = 0; l <= arch.hidden.size(); ++l) {
        const int out = l < arch.hidden.size() ? arch.hidden[l] : 1;
        layers.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out), l == 0, arch.input_norm});
        in = out;
    }
    return LipschitzMLP(arch, std::move(layers));
}

LipschitzMLP LipschitzMLP::random(const Architecture& arch, std::uint64_t seed) {
    auto net = zeros(arch);
    std::mt19937_64 rng(seed);
    for (auto& layer : net.layers_) {
        const double bound = 1.0 / static_cast<double>(layer.W.cols());
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index r = 0; r < layer.W.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.W.cols(); ++c) layer.W(r, c) = u(rng);
    }
    net.project();
    return net;
}

std::size_t LipschitzMLP::num_parameters() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.W.size() + l.b.size());
    return n;
}

std::vector<DenseLayer> LipschitzMLP::effective_layers() const {
    std::vector<DenseLayer> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) out.push_back(constrain_weights(l, arch_.projection));
    return out;
}

void LipschitzMLP::project() {
    for (auto& l : layers_) l = constrain_weights(std::move(l), arch_.projection);
}

double LipschitzMLP::forward(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != arch_.input_dim)
        throw ConfigError("lipnet: input has dimension " + std::to_string(x.size()) + ", expected " +
                          std::to_string(arch_.input_dim));
    Eigen::MatrixXd X = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    return forward_batch(X)(0);
}

Eigen::VectorXd LipschitzMLP::forward_batch(const Eigen::MatrixXd& X) const {
    if (X.rows() != arch_.input_dim) throw ConfigError("lipnet: batch has wrong input dimension");
    const auto eff = effective_layers();
    Eigen::MatrixXd A = X;
    for (std::size_t l = 0; l < eff.size(); ++l) {
        Eigen::MatrixXd Z = eff[l].W * A;
        Z.colwise() += eff[l].b;
        if (l + 1 < eff.size()) group_sort_columns(Z, nullptr, arch_.group_size);
        A = std::move(Z);
    }
    return A.row(0).transpose();
}

LipschitzMLP::BatchGrad LipschitzMLP::backward_batch(const Eigen::MatrixXd& X, const Eigen::VectorXd& seed,
                                                     bool want_params) const {
    if (X.rows() != arch_.input_dim) throw ConfigError("lipnet: batch has wrong input dimension");
    if (seed.size() != X.cols()) throw ConfigError("lipnet: seed length does not match batch size");
    const auto eff = effective_layers();
    const std::size_t L = eff.size();

    std::vector<Eigen::MatrixXd> acts(L);  // acts[l] = input to layer l
    std::vector<Eigen::MatrixXi> perms(L);
    acts[0] = X;
    Eigen::MatrixXd out;
    for (std::size_t l = 0; l < L; ++l) {
        Eigen::MatrixXd Z = eff[l].W * acts[l];
        Z.colwise() += eff[l].b;
        if (l + 1 < L) {
            group_sort_columns(Z, &perms[l], arch_.group_size);
            acts[l + 1] = std::move(Z);
        } else {
            out = std::move(Z);
        }
    }

    BatchGrad result;
    result.values = out.row(0).transpose();
    if (want_params) result.params.resize(L);

    // Parameter gradients are summed separately over the leading run of nonnegative seeds and the rest,
    // so that identical columns with opposite seeds cancel exactly.
    Eigen::Index split = 0;
    while (split < seed.size() && seed[split] >= 0.0) ++split;
    const Eigen::Index rest = seed.size() - split;

    Eigen::MatrixXd G = seed.transpose();  // d/dZ of the output layer
    for (std::size_t l = L; l-- > 0;) {
        if (want_params) {
            Eigen::MatrixXd gW_eff = G.leftCols(split) * acts[l].leftCols(split).transpose();
            Eigen::MatrixXd gW_rest = G.rightCols(rest) * acts[l].rightCols(rest).transpose();
            gW_eff += gW_rest;
            result.params[l].W =
                pullback_projection(layers_[l].W, gW_eff, row_norm_kind(layers_[l]), arch_.projection);
            result.params[l].b = G.leftCols(split).rowwise().sum() + G.rightCols(rest).rowwise().sum();
        }
        Eigen::MatrixXd GA = eff[l].W.transpose() * G;
        if (l == 0) {
            result.inputs = std::move(GA);
            break;
        }
        // Undo the GroupSort of layer l-1.
        Eigen::MatrixXd Gz(GA.rows(), GA.cols());
        const auto& P = perms[l - 1];
        for (Eigen::Index k = 0; k < GA.cols(); ++k)
            for (Eigen::Index i = 0; i < GA.rows(); ++i) Gz(P(i, k), k) = GA(i, k);
        G = std::move(Gz);
    }
    return result;
}

ad::Var LipschitzMLP::forward(ad::Tape& tape, std::span<const ad::Var> params, std::span<const ad::Var> x) const {
    if (params.size() != num_parameters()) throw ConfigError("lipnet: parameter count mismatch");
    if (static_cast<int>(x.size()) != arch_.input_dim) throw ConfigError("lipnet: input dimension mismatch");
    if (!params.empty() && params[0].tape() != &tape) throw StateError("lipnet: parameters live on another tape");

    std::vector<ad::Var> act(x.begin(), x.end());
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto rows = static_cast<std::size_t>(layers_[l].W.rows());
        const auto cols = static_cast<std::size_t>(layers_[l].W.cols());
        const auto kind = row_norm_kind(layers_[l]);
        auto w = [&](std::size_t r, std::size_t c) { return params[offset + r * cols + c]; };

        std::vector<ad::Var> norms(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            ad::Var n;
            if (kind == RowNorm::L2) {
                n = w(r, 0) * w(r, 0);
                for (std::size_t c = 1; c < cols; ++c) n = n + w(r, c) * w(r, c);
                n = ad::sqrt(n);
            } else {
                n = ad::abs(w(r, 0));
                for (std::size_t c = 1; c < cols; ++c)
                    n = kind == RowNorm::L1 ? n + ad::abs(w(r, c)) : ad::max(n, ad::abs(w(r, c)));
            }
            norms[r] = n;
        }
        std::vector<ad::Var> scale(rows);
        if (arch_.projection == Projection::Whole) {
            ad::Var m = norms[0];
            for (std::size_t r = 1; r < rows; ++r) m = ad::max(m, norms[r]);
            const ad::Var s = ad::max(1.0, m);
            std::fill(scale.begin(), scale.end(), s);
        } else {
            for (std::size_t r = 0; r < rows; ++r) {
                if (arch_.projection == Projection::PerRow) {
                    scale[r] = ad::max(1.0, norms[r]);
                } else {
                    scale[r] = ad::max(kUnitRowFloor, norms[r]);
                }
            }
        }

        const std::size_t bias_offset = offset + rows * cols;
        std::vector<ad::Var> z(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            ad::Var acc = w(r, 0) * act[0];
            for (std::size_t c = 1; c < cols; ++c) acc = acc + w(r, c) * act[c];
            z[r] = acc / scale[r] + params[bias_offset + r];
        }
        offset = bias_offset + rows;

        if (l + 1 < layers_.size()) {
            const auto g = static_cast<std::size_t>(arch_.group_size);
            std::vector<std::size_t> idx(g);
            for (std::size_t s = 0; s < rows; s += g) {
                std::iota(idx.begin(), idx.end(), s);
                std::stable_sort(idx.begin(), idx.end(),
                                 [&](std::size_t a, std::size_t b) { return z[a].value() < z[b].value(); });
                std::vector<ad::Var> sorted(g);
                for (std::size_t i = 0; i < g; ++i) sorted[i] = z[idx[i]];
                std::copy(sorted.begin(), sorted.end(), z.begin() + static_cast<std::ptrdiff_t>(s));
            }
        }
        act = std::move(z);
    }
    return act[0];
}

std::vector<double> LipschitzMLP::parameter_vector() const {
    std::vector<double> flat;
    flat.reserve(num_parameters());
    for (const auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.W.rows(); ++r)
            for (Eigen::Index c = 0; c < l.W.cols(); ++c) flat.push_back(l.W(r, c));
        for (Eigen::Index r = 0; r < l.b.size(); ++r) flat.push_back(l.b(r));
    }
    return flat;
}

void LipschitzMLP::set_parameter_vector(std::span<const double> flat) {
    if (flat.size() != num_parameters()) throw ConfigError("lipnet: parameter count mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.W.rows(); ++r)
            for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = flat[k++];
        for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = flat[k++];
    }
}

std::vector<double> LipschitzMLP::flatten(const NetGrad& grad) {
    std::vector<double> flat;
    for (const auto& g : grad) {
        for (Eigen::Index r = 0; r < g.W.rows(); ++r)
            for (Eigen::Index c = 0; c < g.W.cols(); ++c) flat.push_back(g.W(r, c));
        for (Eigen::Index r = 0; r < g.b.size(); ++r) flat.push_back(g.b(r));
    }
    return flat;
}

std::string LipschitzMLP::to_json() const {
    nlohmann::json j;
    j["format"] = "neemo-lipnet";
    j["version"] = 1;
    j["input_dim"] = arch_.input_dim;
    j["widths"] = arch_.hidden;
    j["group_size"] = arch_.group_size;
    j["p"] = to_string(arch_.input_norm);
    j["projection"] = to_string(arch_.projection);
    auto layers = nlohmann::json::array();
    for (const auto& l : layers_) {
        layers.push_back({{"W", matrix_to_json(l.W)}, {"b", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
    }
    j["layers"] = std::move(layers);
    return j.dump(1);
}

LipschitzMLP LipschitzMLP::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("network checkpoint: ") + e.what(), 0);
    }
    try {
        if (j.value("format", "") != "neemo-lipnet") throw InputError("network checkpoint: unknown format tag");
        Architecture arch;
        arch.input_dim = j.at("input_dim").get<int>();
        arch.hidden = j.at("widths").get<std::vector<int>>();
        arch.group_size = j.at("group_size").get<int>();
        arch.input_norm = parse_norm(j.at("p").get<std::string>());
        arch.projection = parse_projection(j.value("projection", std::string("whole")));
        std::vector<DenseLayer> layers;
        for (const auto& jl : j.at("layers")) {
            const auto rows = jl.at("W");
            DenseLayer layer;
            const auto nr = static_cast<Eigen::Index>(rows.size());
            const auto nc = nr == 0 ? 0 : static_cast<Eigen::Index>(rows.at(0).size());
            layer.W.resize(nr, nc);
            for (Eigen::Index r = 0; r < nr; ++r) {
                if (static_cast<Eigen::Index>(rows.at(r).size()) != nc)
                    throw InputError("network checkpoint: ragged weight matrix");
                for (Eigen::Index c = 0; c < nc; ++c) layer.W(r, c) = rows.at(r).at(c).get<double>();
            }
            const auto b = jl.at("b").get<std::vector<double>>();
            layer.b = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
            layers.push_back(std::move(layer));
        }
        return LipschitzMLP(arch, std::move(layers));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("network checkpoint: ") + e.what());
    }
}

void LipschitzMLP::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << to_json() << '\n';
}

LipschitzMLP LipschitzMLP::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

double input_norm(std::span<const double> v, NormP p) {
    double acc = 0.0;
    for (double x : v) {
        switch (p) {
            case NormP::One: acc += std::abs(x); break;
            case NormP::Two: acc += x * x; break;
            case NormP::Inf: acc = std::max(acc, std::abs(x)); break;
        }
    }
    return p == NormP::Two ? std::sqrt(acc) : acc;
}

double lipschitz_ratio_check(const LipschitzMLP& net, std::size_t n_pairs, std::uint64_t seed, double lo,
                             double hi) {
    const int d = net.input_dim();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    constexpr std::size_t kBatch = 4096;
    double worst = 0.0;
    std::vector<double> diff(static_cast<std::size_t>(d));
    for (std::size_t done = 0; done < n_pairs; done += kBatch) {
        const auto n = static_cast<Eigen::Index>(std::min(kBatch, n_pairs - done));
        Eigen::MatrixXd XY(d, 2 * n);
        for (Eigen::Index k = 0; k < 2 * n; ++k)
            for (int i = 0; i < d; ++i) XY(i, k) = u(rng);
        const Eigen::VectorXd f = net.forward_batch(XY);
        for (Eigen::Index k = 0; k < n; ++k) {
            for (int i = 0; i < d; ++i) diff[static_cast<std::size_t>(i)] = XY(i, k) - XY(i, n + k);
            const double dist = input_norm(diff, net.architecture().input_norm);
            if (dist == 0.0) continue;
            worst = std::max(worst, std::abs(f(k) - f(n + k)) / dist);
        }
    }
    return worst;
}

}  // namespace neemo::lipnet
