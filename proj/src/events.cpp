#include "neemo/events.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "neemo/error.hpp"

namespace neemo::events {

namespace {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_number(const std::string& field, std::size_t line) {
    double v = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    if (!field.empty() && *begin == '+') ++begin;
    const auto res = std::from_chars(begin, end, v);
    if (field.empty() || res.ec != std::errc() || res.ptr != end)
        throw ParseError("non-numeric field '" + field + "'", line);
    return v;
}

Event from_rows(const std::vector<std::pair<double, std::vector<double>>>& rows) {
    Event e;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(rows.front().second.size());
    e.energies.resize(n);
    e.positions.resize(d, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        e.energies(k) = rows[static_cast<std::size_t>(k)].first;
        for (Eigen::Index i = 0; i < d; ++i) e.positions(i, k) = rows[static_cast<std::size_t>(k)].second[i];
    }
    return e;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void Event::validate() const {
    if (energies.size() < 1) throw InputError("event: no particles");
    if (positions.cols() != energies.size()) throw InputError("event: energies and positions differ in count");
    if (positions.rows() < 1) throw InputError("event: particles have dimension 0");
    if (!positions.allFinite()) throw InputError("event: non-finite particle position");
    for (Eigen::Index k = 0; k < energies.size(); ++k)
        if (!std::isfinite(energies(k)) || !(energies(k) > 0.0))
            throw InputError("event: particle " + std::to_string(k) + " has non-positive energy");
}

ot::DiscreteMeasure normalize(const Event& event) {
    if (event.energies.size() < 1) throw InputError("normalize: empty event");
    const double total = event.energies.sum();
    if (!(total > 0.0) || !std::isfinite(total)) throw InputError("normalize: total energy must be positive");
    return {event.energies / total, event.positions};
}

Format parse_format(const std::string& s) {
    if (s == "csv") return Format::Csv;
    if (s == "jsonl" || s == "json") return Format::Jsonl;
    throw InputError("unknown event format '" + s + "' (expected csv or jsonl)");
}

Format format_for(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv") return Format::Csv;
    if (ext == ".jsonl" || ext == ".json") return Format::Jsonl;
    throw InputError("cannot infer event format from '" + path.string() + "'");
}

Event parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::size_t dim = 0;
    std::vector<std::pair<double, std::vector<double>>> rows;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split(line, ',');
        if (!have_header) {
            if (fields.size() < 2 || fields[0] != "E")
                throw ParseError("header must be 'E,x1,...,xd'", lineno);
            for (std::size_t i = 1; i < fields.size(); ++i)
                if (fields[i] != "x" + std::to_string(i)) throw ParseError("unexpected column '" + fields[i] + "'", lineno);
            dim = fields.size() - 1;
            have_header = true;
            continue;
        }
        if (fields.size() != dim + 1)
            throw ParseError("expected " + std::to_string(dim + 1) + " columns, found " + std::to_string(fields.size()),
                             lineno);
        const double energy = parse_number(fields[0], lineno);
        if (!std::isfinite(energy) || !(energy > 0.0)) throw ParseError("energy must be positive", lineno);
        std::vector<double> x(dim);
        for (std::size_t i = 0; i < dim; ++i) x[i] = parse_number(fields[i + 1], lineno);
        rows.emplace_back(energy, std::move(x));
    }
    if (!have_header) throw ParseError("missing header", 0);
    if (rows.empty()) throw ParseError("no particles", 0);
    return from_rows(rows);
}

Event parse_jsonl(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::pair<double, std::vector<double>>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw ParseError("invalid JSON", lineno);
        }
        if (!j.is_object() || !j.contains("E") || !j.contains("x")) throw ParseError("missing key 'E' or 'x'", lineno);
        if (!j["E"].is_number()) throw ParseError("'E' is not a number", lineno);
        if (!j["x"].is_array() || j["x"].empty()) throw ParseError("'x' must be a non-empty array", lineno);
        const double energy = j["E"].get<double>();
        if (!std::isfinite(energy) || !(energy > 0.0)) throw ParseError("energy must be positive", lineno);
        std::vector<double> x;
        for (const auto& c : j["x"]) {
            if (!c.is_number()) throw ParseError("non-numeric coordinate", lineno);
            x.push_back(c.get<double>());
        }
        if (!rows.empty() && x.size() != rows.front().second.size())
            throw ParseError("coordinate dimension changes", lineno);
        rows.emplace_back(energy, std::move(x));
    }
    if (rows.empty()) throw ParseError("no particles", 0);
    return from_rows(rows);
}

std::string to_csv(const Event& event) {
    event.validate();
    std::string out = "E";
    for (Eigen::Index i = 0; i < event.dim(); ++i) out += ",x" + std::to_string(i + 1);
    out += '\n';
    for (Eigen::Index k = 0; k < event.size(); ++k) {
        out += format_double(event.energies(k));
        for (Eigen::Index i = 0; i < event.dim(); ++i) out += "," + format_double(event.positions(i, k));
        out += '\n';
    }
    return out;
}

std::string to_jsonl(const Event& event) {
    event.validate();
    std::string out;
    for (Eigen::Index k = 0; k < event.size(); ++k) {
        out += "{\"E\":" + format_double(event.energies(k)) + ",\"x\":[";
        for (Eigen::Index i = 0; i < event.dim(); ++i) {
            if (i > 0) out += ',';
            out += format_double(event.positions(i, k));
        }
        out += "]}\n";
    }
    return out;
}

Event load_event(const std::filesystem::path& path, Format format) {
    const auto text = read_file(path);
    try {
        return format == Format::Csv ? parse_csv(text) : parse_jsonl(text);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    }
}

Event load_event(const std::filesystem::path& path) { return load_event(path, format_for(path)); }

void save_event(const Event& event, const std::filesystem::path& path, Format format) {
    const auto text = format == Format::Csv ? to_csv(event) : to_jsonl(event);
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

void save_event(const Event& event, const std::filesystem::path& path) { save_event(event, path, format_for(path)); }

Event gen_circle_event(const std::vector<std::array<double, 3>>& circles, int points_per_circle, double jitter,
                       std::uint64_t seed) {
    if (circles.empty() || points_per_circle < 1) throw ConfigError("gen_circle_event: nothing to generate");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(circles.size()) * points_per_circle;
    Event e;
    e.energies = Eigen::VectorXd::Ones(n);
    e.positions.resize(2, n);
    Eigen::Index k = 0;
    for (const auto& [cx, cy, r] : circles) {
        if (!(r > 0.0)) throw ConfigError("gen_circle_event: radius must be positive");
        for (int i = 0; i < points_per_circle; ++i, ++k) {
            const double a = angle(rng);
            const double rad = jitter > 0.0 ? r + jitter * noise(rng) : r;
            e.positions(0, k) = cx + rad * std::cos(a);
            e.positions(1, k) = cy + rad * std::sin(a);
        }
    }
    e.label = "circles";
    return e;
}

Event gen_triangle_ellipse_event(const TriangleEllipse& p, int points_per_shape, std::uint64_t seed) {
    if (points_per_shape < 1) throw ConfigError("gen_triangle_ellipse_event: points_per_shape must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> f1(static_cast<std::size_t>(points_per_shape)), f2(f1.size());
    for (auto& f : f1) f = u(rng);
    for (auto& f : f2) f = u(rng);
    const auto tri = shapes::perimeter_points(shapes::ShapeSpec::triangle(p.triangle, points_per_shape), f1);
    const auto ell =
        shapes::perimeter_points(shapes::ShapeSpec::ellipse(p.cx, p.cy, p.a, p.b, p.rotation, points_per_shape), f2);
    Event e;
    e.positions.resize(2, tri.cols() + ell.cols());
    e.positions << tri, ell;
    e.energies = Eigen::VectorXd::Ones(e.positions.cols());
    e.label = "triangle+ellipse";
    return e;
}

Event gen_subjet_event(const SubjetParams& p, std::uint64_t seed) {
    if (p.n_centers < 1) throw ConfigError("gen_subjet_event: n_centers must be >= 1");
    if (!(p.sigma > 0.0)) throw ConfigError("gen_subjet_event: sigma must be positive");
    if (p.particles_per_center < 1) throw ConfigError("gen_subjet_event: particles_per_center must be >= 1");
    std::mt19937_64 rng(seed);
    const double inset = 3.0 * p.sigma;
    double x0 = p.box.xmin + inset, x1 = p.box.xmax - inset;
    double y0 = p.box.ymin + inset, y1 = p.box.ymax - inset;
    if (x1 < x0) x0 = x1 = 0.5 * (p.box.xmin + p.box.xmax);
    if (y1 < y0) y0 = y1 = 0.5 * (p.box.ymin + p.box.ymax);
    std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
    std::normal_distribution<double> g(0.0, p.sigma);
    const auto n = static_cast<Eigen::Index>(p.n_centers) * p.particles_per_center;
    Event e;
    e.energies = Eigen::VectorXd::Ones(n);
    e.positions.resize(2, n);
    Eigen::Index k = 0;
    for (int c = 0; c < p.n_centers; ++c) {
        const double cx = ux(rng), cy = uy(rng);
        for (int i = 0; i < p.particles_per_center; ++i, ++k) {
            e.positions(0, k) = cx + g(rng);
            e.positions(1, k) = cy + g(rng);
        }
    }
    e.label = std::to_string(p.n_centers) + "-subjet";
    return e;
}

std::vector<std::array<double, 3>> three_circle_layout() {
    return {{0.28, 0.30, 0.14}, {0.72, 0.34, 0.10}, {0.50, 0.72, 0.12}};
}

TriangleEllipse triangle_ellipse_layout() {
    TriangleEllipse p;
    p.triangle = {0.12, 0.18, 0.46, 0.14, 0.27, 0.48};
    p.cx = 0.68;
    p.cy = 0.64;
    p.a = 0.20;
    p.b = 0.10;
    p.rotation = 0.5;
    return p;
}

}  // namespace neemo::events
