#include "q3r/checkpoint.hpp"

#include "q3r/errors.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

static_assert(sizeof(double) == 8, "checkpoint payloads assume 64-bit doubles");

namespace q3r {

namespace {

constexpr char kMagic[] = "Q3RCKPT1";

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_matrix_rm(std::ostream& out, const Matrix& w) {
    std::vector<double> row(static_cast<std::size_t>(w.cols()));
    for (Index i = 0; i < w.rows(); ++i) {
        for (Index j = 0; j < w.cols(); ++j)
            row[static_cast<std::size_t>(j)] = w(i, j);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
}

Matrix read_matrix_rm(std::istream& in, Index rows, Index cols) {
    Matrix w(rows, cols);
    std::vector<double> row(static_cast<std::size_t>(cols));
    for (Index i = 0; i < rows; ++i) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
        if (!in)
            throw ConfigError("truncated checkpoint payload");
        for (Index j = 0; j < cols; ++j)
            w(i, j) = row[static_cast<std::size_t>(j)];
    }
    return w;
}

Vector read_vector(std::istream& in, Index n) {
    const Matrix m = read_matrix_rm(in, n, 1);
    return m.col(0);
}

double parse_double(const std::string& token) {
    try {
        std::size_t used = 0;
        const double out = std::stod(token, &used);
        if (used != token.size())
            throw std::invalid_argument(token);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad number in checkpoint header: " + token);
    }
}

long parse_long(const std::string& token) {
    try {
        std::size_t used = 0;
        const long out = std::stol(token, &used);
        if (used != token.size())
            throw std::invalid_argument(token);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad integer in checkpoint header: " + token);
    }
}

} // namespace

void save_checkpoint(const std::string& path, const Net& net,
                     const std::string& config_text, const CheckpointMeta& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + path);

    out << kMagic << "\n";
    out << "meta eval_loss " << fmt_double(meta.eval_loss) << "\n";
    out << "meta eval_accuracy " << fmt_double(meta.eval_accuracy) << "\n";
    out << "config " << config_text.size() << "\n";
    out << config_text;
    out << "\n";

    const std::vector<const ParamTensor*> params = net.params();
    for (const ParamTensor* p : params)
        out << "tensor " << p->name << " " << p->w.rows() << " " << p->w.cols()
            << "\n";
    for (const ParamTensor* p : params) {
        if (!p->op)
            continue;
        const ReweightingOperator& op = *p->op;
        out << "op " << p->name << " " << fmt_double(op.eps()) << " "
            << op.rank_envelope() << " " << p->smoothing.r_target << " "
            << fmt_double(p->smoothing.eps) << " " << op.rows() << " " << op.cols()
            << " " << fmt_double(op.f_eps_at_anchor()) << " "
            << fmt_double(op.anchor_frob_sq()) << "\n";
    }
    out << "end\n";

    for (const ParamTensor* p : params)
        write_matrix_rm(out, p->w);
    for (const ParamTensor* p : params) {
        if (!p->op)
            continue;
        write_matrix_rm(out, p->op->u());
        write_matrix_rm(out, Matrix(p->op->sigma()));
        write_matrix_rm(out, p->op->v());
    }
    if (!out)
        throw ConfigError("write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line) || line != kMagic)
        throw ConfigError("not a checkpoint file: " + path);

    LoadedCheckpoint ck;
    struct TensorLine {
        std::string name;
        Index rows, cols;
    };
    struct OpLine {
        std::string name;
        double eps, state_eps, f_at_anchor, frob_sq;
        Index r_env, r_target, rows, cols;
    };
    std::vector<TensorLine> tensors;
    std::vector<OpLine> ops;

    while (std::getline(in, line)) {
        if (line == "end")
            break;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "meta") {
            std::string key, value;
            ls >> key >> value;
            if (key == "eval_loss")
                ck.meta.eval_loss = parse_double(value);
            else if (key == "eval_accuracy")
                ck.meta.eval_accuracy = parse_double(value);
            else
                throw ConfigError("unknown checkpoint meta key: " + key);
        } else if (tag == "config") {
            std::string size_tok;
            ls >> size_tok;
            const long nbytes = parse_long(size_tok);
            if (nbytes < 0)
                throw ConfigError("bad config length in checkpoint");
            std::string text(static_cast<std::size_t>(nbytes), '\0');
            in.read(text.data(), nbytes);
            if (!in)
                throw ConfigError("truncated checkpoint config");
            char nl = 0;
            in.read(&nl, 1);
            if (nl != '\n')
                throw ConfigError("malformed checkpoint config block");
            ck.config_text = std::move(text);
        } else if (tag == "tensor") {
            TensorLine t;
            std::string r, c;
            ls >> t.name >> r >> c;
            t.rows = parse_long(r);
            t.cols = parse_long(c);
            if (t.name.empty() || t.rows < 1 || t.cols < 1)
                throw ConfigError("bad tensor line in checkpoint");
            tensors.push_back(std::move(t));
        } else if (tag == "op") {
            OpLine o;
            std::string eps, renv, rtgt, seps, rows, cols, fa, fr;
            ls >> o.name >> eps >> renv >> rtgt >> seps >> rows >> cols >> fa >> fr;
            o.eps = parse_double(eps);
            o.r_env = parse_long(renv);
            o.r_target = parse_long(rtgt);
            o.state_eps = parse_double(seps);
            o.rows = parse_long(rows);
            o.cols = parse_long(cols);
            o.f_at_anchor = parse_double(fa);
            o.frob_sq = parse_double(fr);
            ops.push_back(std::move(o));
        } else {
            throw ConfigError("unknown checkpoint header line: " + line);
        }
    }
    if (line != "end")
        throw ConfigError("checkpoint header has no end marker");
    if (ck.config_text.empty())
        throw ConfigError("checkpoint has no embedded config");

    ck.config = parse_config_text(ck.config_text);
    ck.net = make_net(ck.config.net, ck.config.seed);

    const std::vector<ParamTensor*> params = ck.net.params();
    if (params.size() != tensors.size())
        throw ConfigError("checkpoint tensor count does not match its config");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const TensorLine& t = tensors[i];
        if (params[i]->name != t.name || params[i]->w.rows() != t.rows ||
            params[i]->w.cols() != t.cols)
            throw ConfigError("checkpoint tensor mismatch at " + t.name);
        params[i]->w = read_matrix_rm(in, t.rows, t.cols);
    }
    for (const OpLine& o : ops) {
        ParamTensor* p = ck.net.find(o.name);
        if (p == nullptr)
            throw ConfigError("checkpoint operator for unknown tensor " + o.name);
        const Matrix u = read_matrix_rm(in, o.rows, o.r_env);
        const Vector sigma = read_vector(in, o.r_env);
        const Matrix v = read_matrix_rm(in, o.cols, o.r_env);
        p->op = ReweightingOperator::from_parts(u, sigma, v, o.eps, o.rows, o.cols,
                                                o.f_at_anchor, o.frob_sq);
        p->q3r_enabled = true;
        p->smoothing.eps = o.state_eps;
        p->smoothing.r_target = o.r_target;
        p->smoothing.eps_floor = ck.config.opt.eps_floor;
    }
    return ck;
}

} // namespace q3r
