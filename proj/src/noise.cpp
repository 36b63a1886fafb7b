#include "phaserm/noise.hpp"

#include <Eigen/Cholesky>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace phaserm {

namespace {

// Shortest round-trip decimal form of a double ("1", "0.2", "3.5", ...).
std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("bad number in noise spec: " + text);
    }
    if (pos != text.size()) throw std::invalid_argument("bad number in noise spec: " + text);
    return v;
}

// Split "a=1,b=f(x,y),c" at top-level commas.
std::vector<std::string> split_top_level(const std::string& body) {
    std::vector<std::string> parts;
    std::string cur;
    int depth = 0;
    for (char c : body) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    return parts;
}

std::string support_to_string(const SupportRule& rule) {
    switch (rule.kind) {
        case SupportRule::Kind::absolute:
            return fmt(rule.value);
        case SupportRule::Kind::full_n:
            return "n";
        case SupportRule::Kind::fraction:
            return fmt(rule.value) + "n";
    }
    throw std::logic_error("unreachable support kind");
}

SupportRule support_from_string(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("empty support in noise spec");
    if (text == "n") return SupportRule::full_n();
    if (text.back() == 'n')
        return SupportRule::fraction(parse_double(text.substr(0, text.size() - 1)));
    return SupportRule::absolute(parse_double(text));
}

}  // namespace

int SupportRule::resolve(int n) const {
    double s = 0.0;
    switch (kind) {
        case Kind::absolute:
            s = value;
            break;
        case Kind::full_n:
            s = static_cast<double>(n);
            break;
        case Kind::fraction:
            s = static_cast<double>(std::llround(value * n));
            break;
    }
    if (s < 0.0 || s > static_cast<double>(n))
        throw std::invalid_argument("noise support outside [0, n]");
    return static_cast<int>(std::llround(s));
}

NoiseSpec NoiseSpec::none() { return {}; }

NoiseSpec NoiseSpec::deterministic(SupportRule s, double rho, double phi) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in [0, 1]");
    if (s.value < 0.0) throw std::invalid_argument("support must be non-negative");
    NoiseSpec spec;
    spec.kind = Kind::deterministic;
    spec.support = s;
    spec.rho = rho;
    spec.phi = phi;
    return spec;
}

NoiseSpec NoiseSpec::gaussian(double mu, Cov cov, double phi) {
    NoiseSpec spec;
    spec.kind = Kind::gaussian;
    spec.mu = mu;
    spec.cov = cov;
    spec.phi = phi;
    return spec;
}

NoiseSpec NoiseSpec::laplace(double mu, double phi) {
    NoiseSpec spec;
    spec.kind = Kind::laplace;
    spec.mu = mu;
    spec.phi = phi;
    return spec;
}

NoiseSpec NoiseSpec::student_t(double nu, bool rescaled, double phi) {
    if (!(nu > 0.0)) throw std::invalid_argument("student_t needs nu > 0");
    if (rescaled && !(nu > 2.0))
        throw std::invalid_argument("rescaled student_t needs nu > 2 for a finite variance");
    NoiseSpec spec;
    spec.kind = Kind::student_t;
    spec.nu = nu;
    spec.rescaled = rescaled;
    spec.phi = phi;
    return spec;
}

NoiseSpec NoiseSpec::repeated_block(int block, NoiseSpec base, double phi) {
    if (block < 1) throw std::invalid_argument("repeated_block needs block >= 1");
    if (base.kind == Kind::repeated_block)
        throw std::invalid_argument("repeated_block cannot nest repeated_block");
    NoiseSpec spec;
    spec.kind = Kind::repeated_block;
    spec.block = block;
    spec.base = std::make_shared<NoiseSpec>(std::move(base));
    spec.phi = phi;
    return spec;
}

std::string NoiseSpec::encode() const {
    switch (kind) {
        case Kind::none:
            return "none";
        case Kind::deterministic:
            return "det(s=" + support_to_string(support) + ",rho=" + fmt(rho) +
                   ",phi=" + fmt(phi) + ")";
        case Kind::gaussian:
            return "gauss(mu=" + fmt(mu) + ",cov=" + (cov == Cov::iid ? "iid" : "corr") +
                   ",phi=" + fmt(phi) + ")";
        case Kind::laplace:
            return "lap(mu=" + fmt(mu) + ",phi=" + fmt(phi) + ")";
        case Kind::student_t:
            return rescaled ? "t(nu=" + fmt(nu) + ",rescaled,phi=" + fmt(phi) + ")"
                            : "t(nu=" + fmt(nu) + ",phi=" + fmt(phi) + ")";
        case Kind::repeated_block:
            return "rep(block=" + fmt(static_cast<double>(block)) + ",base=" + base->encode() +
                   ",phi=" + fmt(phi) + ")";
    }
    throw std::logic_error("unreachable noise kind");
}

NoiseSpec NoiseSpec::parse(const std::string& text) {
    if (text == "none") return NoiseSpec::none();
    const size_t open = text.find('(');
    if (open == std::string::npos || text.back() != ')')
        throw std::invalid_argument("malformed noise spec: " + text);
    const std::string head = text.substr(0, open);
    const std::string body = text.substr(open + 1, text.size() - open - 2);

    bool rescaled_flag = false;
    std::vector<std::pair<std::string, std::string>> kv;
    for (const std::string& part : split_top_level(body)) {
        const size_t eq = part.find('=');
        if (eq == std::string::npos) {
            if (part == "rescaled") {
                rescaled_flag = true;
                continue;
            }
            throw std::invalid_argument("malformed noise field: " + part);
        }
        kv.emplace_back(part.substr(0, eq), part.substr(eq + 1));
    }
    auto get = [&](const std::string& key) -> const std::string& {
        for (const auto& [k, v] : kv)
            if (k == key) return v;
        throw std::invalid_argument("noise spec missing field '" + key + "': " + text);
    };

    if (head == "det")
        return NoiseSpec::deterministic(support_from_string(get("s")), parse_double(get("rho")),
                                        parse_double(get("phi")));
    if (head == "gauss") {
        const std::string& cov = get("cov");
        if (cov != "iid" && cov != "corr")
            throw std::invalid_argument("gaussian cov must be iid or corr");
        return NoiseSpec::gaussian(parse_double(get("mu")),
                                   cov == "iid" ? Cov::iid : Cov::correlated,
                                   parse_double(get("phi")));
    }
    if (head == "lap")
        return NoiseSpec::laplace(parse_double(get("mu")), parse_double(get("phi")));
    if (head == "t")
        return NoiseSpec::student_t(parse_double(get("nu")), rescaled_flag,
                                    parse_double(get("phi")));
    if (head == "rep") {
        const double block = parse_double(get("block"));
        if (block != std::floor(block))
            throw std::invalid_argument("repeated_block block must be an integer");
        return NoiseSpec::repeated_block(static_cast<int>(block), NoiseSpec::parse(get("base")),
                                         parse_double(get("phi")));
    }
    throw std::invalid_argument("unknown noise family: " + head);
}

VecR deterministic_noise(int n, int s, double rho, double phi) {
    if (n < 0 || s < 0 || s > n) throw std::invalid_argument("need 0 <= s <= n");
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in [0, 1]");
    const int pos = static_cast<int>(std::floor(rho * s));
    VecR out = VecR::Zero(n);
    for (int i = 0; i < pos; ++i) out(i) = phi;
    for (int i = pos; i < s; ++i) out(i) = -phi;
    return out;
}

MatR correlated_unit_diag_factor(int n, RandomStream& stream) {
    if (n < 1) throw std::invalid_argument("dimension must be positive");
    for (int attempt = 0; attempt < 4; ++attempt) {
        MatR r(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) r(i, j) = stream.normal();
        MatR gram = r * r.transpose();
        MatR sigma(n, n);
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            if (!(gram(i, i) > 0.0)) ok = false;
        }
        if (!ok) continue;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                sigma(i, j) = gram(i, j) / std::sqrt(gram(i, i) * gram(j, j));
        Eigen::LLT<Eigen::MatrixXd> llt(sigma);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    throw std::runtime_error("failed to factor a correlated covariance after 4 attempts");
}

NoiseVector sample_noise(const NoiseSpec& spec, int n, RandomStream& stream,
                         RandomStream* cov_stream) {
    if (n < 0) throw std::invalid_argument("noise length must be non-negative");
    NoiseVector out;
    out.label = spec.encode();
    switch (spec.kind) {
        case NoiseSpec::Kind::none:
            out.values = VecR::Zero(n);
            return out;
        case NoiseSpec::Kind::deterministic:
            out.values = deterministic_noise(n, spec.support.resolve(n), spec.rho, spec.phi);
            return out;
        case NoiseSpec::Kind::gaussian: {
            VecR v(n);
            if (spec.cov == NoiseSpec::Cov::iid) {
                for (int i = 0; i < n; ++i) v(i) = spec.mu + stream.normal();
            } else {
                if (cov_stream == nullptr)
                    throw std::invalid_argument("correlated noise needs a covariance stream");
                MatR L = correlated_unit_diag_factor(n, *cov_stream);
                VecR g(n);
                for (int i = 0; i < n; ++i) g(i) = stream.normal();
                v = L * g;
                v.array() += spec.mu;
            }
            out.values = spec.phi * v;
            return out;
        }
        case NoiseSpec::Kind::laplace: {
            VecR v(n);
            for (int i = 0; i < n; ++i) v(i) = stream.laplace_unit_sd(spec.mu);
            out.values = spec.phi * v;
            return out;
        }
        case NoiseSpec::Kind::student_t: {
            VecR v(n);
            for (int i = 0; i < n; ++i)
                v(i) = spec.rescaled ? stream.student_t_unit_var(spec.nu)
                                     : stream.student_t(spec.nu);
            out.values = spec.phi * v;
            return out;
        }
        case NoiseSpec::Kind::repeated_block: {
            NoiseVector base = sample_noise(*spec.base, spec.block, stream, cov_stream);
            VecR v(n);
            for (int k = 0; k < n; ++k) v(k) = base.values(k % spec.block);
            out.values = spec.phi * v;
            return out;
        }
    }
    throw std::logic_error("unreachable noise kind");
}

}  // namespace phaserm
