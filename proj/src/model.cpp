#include "unprompt/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "unprompt/error.hpp"
#include "unprompt/numerics.hpp"

namespace unprompt {

std::string to_string(Nonlinearity f) {
    switch (f) {
        case Nonlinearity::Relu: return "relu";
        case Nonlinearity::Tanh: return "tanh";
        case Nonlinearity::Identity: return "identity";
    }
    return "relu";
}

Nonlinearity parse_nonlinearity(const std::string& name) {
    if (name == "relu") return Nonlinearity::Relu;
    if (name == "tanh") return Nonlinearity::Tanh;
    if (name == "identity") return Nonlinearity::Identity;
    throw Error(ErrorKind::Config, "unknown nonlinearity '" + name + "'");
}

GeneralistModel init_model(const ModelShape& shape, std::uint64_t seed, Nonlinearity nonlinearity) {
    if (shape.d_prime < 1 || shape.d_hidden < 1 || shape.num_tokens < 1)
        throw Error(ErrorKind::Config, "model dimensions and token count must be positive");
    GeneralistModel model;
    model.shape = shape;
    model.nonlinearity = nonlinearity;
    model.seed = seed;
    Rng rng(seed);
    const double w_bound = 1.0 / std::sqrt(static_cast<double>(shape.d_prime));
    model.weight = rng.uniform_matrix(shape.d_prime, shape.d_hidden, -w_bound, w_bound);
    Rng prompt_rng = rng.fork(1);
    init_prompt_parameters(model, prompt_rng);
    return model;
}

void init_prompt_parameters(GeneralistModel& model, Rng& rng) {
    const auto& s = model.shape;
    model.prompt_tokens = rng.uniform_matrix(s.num_tokens, s.d_prime, -1e-2, 1e-2);
    model.token_projections = rng.uniform_matrix(s.num_tokens, s.d_prime, -1e-2, 1e-2);
    const double h_bound = 1.0 / std::sqrt(static_cast<double>(s.d_hidden));
    model.transform_weight = rng.uniform_matrix(s.d_hidden, s.d_hidden, -h_bound, h_bound);
    model.transform_bias = Matrix::Zero(1, s.d_hidden);
}

void validate(const GeneralistModel& model) {
    const auto& s = model.shape;
    auto check = [](const Matrix& m, Index rows, Index cols, const char* name) {
        if (m.rows() != rows || m.cols() != cols)
            throw Error(ErrorKind::Shape, std::string(name) + " is " + std::to_string(m.rows()) + "x" +
                                              std::to_string(m.cols()) + ", expected " + std::to_string(rows) +
                                              "x" + std::to_string(cols));
        require_finite(m, name);
    };
    check(model.weight, s.d_prime, s.d_hidden, "weight");
    check(model.prompt_tokens, s.num_tokens, s.d_prime, "prompt_tokens");
    check(model.token_projections, s.num_tokens, s.d_prime, "token_projections");
    check(model.transform_weight, s.d_hidden, s.d_hidden, "transform_weight");
    check(model.transform_bias, 1, s.d_hidden, "transform_bias");
}

Matrix activate(Nonlinearity f, const Matrix& pre) {
    switch (f) {
        case Nonlinearity::Relu: return pre.cwiseMax(0.0);
        case Nonlinearity::Tanh: return pre.array().tanh().matrix();
        case Nonlinearity::Identity: return pre;
    }
    return pre;
}

Matrix activate_derivative(Nonlinearity f, const Matrix& pre) {
    switch (f) {
        case Nonlinearity::Relu: return (pre.array() > 0.0).cast<Real>().matrix();
        case Nonlinearity::Tanh: return (1.0 - pre.array().tanh().square()).matrix();
        case Nonlinearity::Identity: return Matrix::Ones(pre.rows(), pre.cols());
    }
    return Matrix::Ones(pre.rows(), pre.cols());
}

namespace {

void check_unified(const Matrix& unified, const GeneralistModel& model) {
    if (unified.cols() != model.shape.d_prime)
        throw Error(ErrorKind::Shape, "attributes have " + std::to_string(unified.cols()) +
                                          " columns but the model expects d_prime " +
                                          std::to_string(model.shape.d_prime));
}

void zero_rows(Matrix& m, const Eigen::Array<bool, Eigen::Dynamic, 1>& mask) {
    for (Index i = 0; i < m.rows(); ++i)
        if (mask(i)) m.row(i).setZero();
}

}  // namespace

Matrix apply_prompt(const Matrix& unified, const GeneralistModel& model) {
    check_unified(unified, model);
    const Matrix alpha = row_softmax(unified * model.token_projections.transpose());
    return unified + alpha * model.prompt_tokens;
}

ForwardCache forward_cached(const RowNormalizedAdjacency& adj, const Matrix& unified, const GeneralistModel& model,
                            bool use_transform) {
    check_unified(unified, model);
    if (adj.size() != unified.rows())
        throw Error(ErrorKind::Shape, "adjacency has " + std::to_string(adj.size()) + " nodes, attributes " +
                                          std::to_string(unified.rows()));
    ForwardCache c;
    c.alpha = row_softmax(unified * model.token_projections.transpose());
    c.prompted = unified + c.alpha * model.prompt_tokens;
    c.mixed = sparse_matmul(adj, c.prompted);
    c.latent = c.prompted * model.weight;
    c.aggregated = c.mixed * model.weight;
    if (use_transform) {
        // Both branches have rank at most d′; multiply through W·A.
        const Matrix fused = model.weight * model.transform_weight;
        c.latent_pre = (c.prompted * fused).rowwise() + model.transform_bias.row(0);
        c.agg_pre = (c.mixed * fused).rowwise() + model.transform_bias.row(0);
        c.out.z = activate(model.nonlinearity, c.latent_pre);
        c.out.z_agg = activate(model.nonlinearity, c.agg_pre);
        zero_rows(c.out.z_agg, adj.isolated);
    } else {
        c.out.z = c.latent;
        c.out.z_agg = c.aggregated;
    }
    return c;
}

NodeEmbeddings forward(const RowNormalizedAdjacency& adj, const Matrix& prompted, const GeneralistModel& model,
                       bool use_transform) {
    check_unified(prompted, model);
    if (adj.size() != prompted.rows())
        throw Error(ErrorKind::Shape, "adjacency and attribute row counts differ");
    NodeEmbeddings out;
    const Matrix latent = prompted * model.weight;
    const Matrix aggregated = sparse_matmul(adj, latent);
    if (!use_transform) return {latent, aggregated};
    out.z = activate(model.nonlinearity, (latent * model.transform_weight).rowwise() + model.transform_bias.row(0));
    out.z_agg =
        activate(model.nonlinearity, (aggregated * model.transform_weight).rowwise() + model.transform_bias.row(0));
    zero_rows(out.z_agg, adj.isolated);
    return out;
}

Vector predictability_scores(const NodeEmbeddings& emb) { return rowwise_cosine(emb.z, emb.z_agg); }

ModelGradients backward(const RowNormalizedAdjacency& adj, const Matrix& unified, const GeneralistModel& model,
                        bool use_transform, const ForwardCache& cache, const Matrix& grad_z,
                        const Matrix& grad_z_agg) {
    ModelGradients g;
    Matrix grad_prompted;
    if (use_transform) {
        Matrix masked = grad_z_agg;
        zero_rows(masked, adj.isolated);
        const Matrix d_latent_pre =
            (grad_z.array() * activate_derivative(model.nonlinearity, cache.latent_pre).array()).matrix();
        const Matrix d_agg_pre =
            (masked.array() * activate_derivative(model.nonlinearity, cache.agg_pre).array()).matrix();
        const Matrix through = cache.prompted.transpose() * d_latent_pre + cache.mixed.transpose() * d_agg_pre;
        g.transform_weight = model.weight.transpose() * through;
        g.transform_bias = d_latent_pre.colwise().sum() + d_agg_pre.colwise().sum();
        g.weight = through * model.transform_weight.transpose();
        const Matrix d_pre = d_latent_pre + adj.matrix.transpose() * d_agg_pre;
        grad_prompted = d_pre * (model.weight * model.transform_weight).transpose();
    } else {
        g.transform_weight = Matrix::Zero(model.transform_weight.rows(), model.transform_weight.cols());
        g.transform_bias = Matrix::Zero(1, model.transform_bias.cols());
        const Matrix grad_latent = grad_z + adj.matrix.transpose() * grad_z_agg;
        g.weight = cache.prompted.transpose() * grad_latent;
        grad_prompted = grad_latent * model.weight.transpose();
    }

    g.prompt_tokens = cache.alpha.transpose() * grad_prompted;
    const Matrix grad_alpha = grad_prompted * model.prompt_tokens.transpose();
    const Matrix grad_logits = row_softmax_backward(cache.alpha, grad_alpha);
    g.token_projections = grad_logits.transpose() * unified;
    return g;
}

// ---------------------------------------------------------------- persistence

namespace {

constexpr const char* kMagic = "UNPROMPT-MODEL";

std::vector<std::pair<std::string, const Matrix*>> arrays_of(const GeneralistModel& m) {
    std::vector<std::pair<std::string, const Matrix*>> out{{"weight", &m.weight}};
    if (m.stage == ModelStage::Full) {
        out.emplace_back("prompt_tokens", &m.prompt_tokens);
        out.emplace_back("token_projections", &m.token_projections);
        out.emplace_back("transform_weight", &m.transform_weight);
        out.emplace_back("transform_bias", &m.transform_bias);
    }
    return out;
}

std::vector<std::pair<Index, Index>> expected_shapes(const ModelShape& s, ModelStage stage) {
    std::vector<std::pair<Index, Index>> out{{s.d_prime, s.d_hidden}};
    if (stage == ModelStage::Full) {
        out.emplace_back(s.num_tokens, s.d_prime);
        out.emplace_back(s.num_tokens, s.d_prime);
        out.emplace_back(s.d_hidden, s.d_hidden);
        out.emplace_back(1, s.d_hidden);
    }
    return out;
}

void put_le(std::string& buf, double x) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    return std::bit_cast<double>(bits);
}

std::string serialize_payload(const GeneralistModel& model) {
    std::string buf;
    for (const auto& [name, m] : arrays_of(model))
        for (Index i = 0; i < m->rows(); ++i)
            for (Index j = 0; j < m->cols(); ++j) put_le(buf, (*m)(i, j));
    return buf;
}

Index parse_count(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size() || v < 1) throw std::invalid_argument(key);
        return static_cast<Index>(v);
    } catch (const std::exception&) {
        throw Error(ErrorKind::CorruptPayload, "model header: invalid " + key + " '" + value + "'");
    }
}

}  // namespace

void save_model(const GeneralistModel& model, const std::filesystem::path& path) {
    {
        const auto shapes = expected_shapes(model.shape, model.stage);
        const auto arrays = arrays_of(model);
        for (std::size_t k = 0; k < arrays.size(); ++k)
            if (arrays[k].second->rows() != shapes[k].first || arrays[k].second->cols() != shapes[k].second)
                throw Error(ErrorKind::Shape, "save_model: " + arrays[k].first + " does not match the header shape");
    }
    const std::string payload = serialize_payload(model);
    std::ostringstream header;
    header << kMagic << '\n'
           << "schema_version " << kModelSchemaVersion << '\n'
           << "stage " << (model.stage == ModelStage::Full ? "full" : "pretrained") << '\n'
           << "d_prime " << model.shape.d_prime << '\n'
           << "d_hidden " << model.shape.d_hidden << '\n'
           << "num_tokens " << model.shape.num_tokens << '\n'
           << "nonlinearity " << to_string(model.nonlinearity) << '\n'
           << "transform " << (model.use_transform ? 1 : 0) << '\n'
           << "normalize " << (model.normalize_attributes ? 1 : 0) << '\n'
           << "seed " << model.seed << '\n'
           << "arrays";
    for (const auto& [name, m] : arrays_of(model)) header << ' ' << name;
    header << '\n' << "payload_bytes " << payload.size() << '\n' << "end\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write model file " + path.string());
    const std::string text = header.str();
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw Error(ErrorKind::Io, "failed writing model file " + path.string());
}

GeneralistModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open model file " + path.string());

    std::string line;
    if (!std::getline(in, line) || line != kMagic)
        throw Error(ErrorKind::CorruptPayload, path.string() + " is not a model file");

    GeneralistModel model;
    bool saw_version = false;
    std::size_t payload_bytes = 0;
    bool saw_end = false;
    std::vector<std::string> declared_arrays;
    while (std::getline(in, line)) {
        if (line == "end") {
            saw_end = true;
            break;
        }
        std::istringstream fields(line);
        std::string key, value;
        fields >> key;
        std::getline(fields >> std::ws, value);
        if (key == "schema_version") {
            if (value != std::to_string(kModelSchemaVersion))
                throw Error(ErrorKind::Version, "model schema version " + value + " is not supported (expected " +
                                                    std::to_string(kModelSchemaVersion) + ")");
            saw_version = true;
        } else if (key == "stage") {
            if (value == "full") model.stage = ModelStage::Full;
            else if (value == "pretrained") model.stage = ModelStage::Pretrained;
            else throw Error(ErrorKind::CorruptPayload, "model header: unknown stage '" + value + "'");
        } else if (key == "d_prime") {
            model.shape.d_prime = parse_count(value, key);
        } else if (key == "d_hidden") {
            model.shape.d_hidden = parse_count(value, key);
        } else if (key == "num_tokens") {
            model.shape.num_tokens = parse_count(value, key);
        } else if (key == "nonlinearity") {
            try {
                model.nonlinearity = parse_nonlinearity(value);
            } catch (const Error&) {
                throw Error(ErrorKind::CorruptPayload, "model header: unknown nonlinearity '" + value + "'");
            }
        } else if (key == "transform") {
            model.use_transform = value == "1";
        } else if (key == "normalize") {
            model.normalize_attributes = value == "1";
        } else if (key == "seed") {
            model.seed = std::stoull(value);
        } else if (key == "arrays") {
            std::istringstream names(value);
            for (std::string n; names >> n;) declared_arrays.push_back(n);
        } else if (key == "payload_bytes") {
            payload_bytes = static_cast<std::size_t>(std::stoull(value));
        } else {
            throw Error(ErrorKind::CorruptPayload, "model header: unknown key '" + key + "'");
        }
    }
    if (!saw_version) throw Error(ErrorKind::Version, "model header lacks schema_version");
    if (!saw_end) throw Error(ErrorKind::CorruptPayload, "model header is not terminated");

    std::vector<std::string> stage_arrays{"weight"};
    if (model.stage == ModelStage::Full)
        stage_arrays.insert(stage_arrays.end(),
                            {"prompt_tokens", "token_projections", "transform_weight", "transform_bias"});
    if (declared_arrays != stage_arrays)
        throw Error(ErrorKind::CorruptPayload, "model header: array list does not match the declared stage");

    std::vector<Matrix*> targets{&model.weight};
    if (model.stage == ModelStage::Full) {
        targets.push_back(&model.prompt_tokens);
        targets.push_back(&model.token_projections);
        targets.push_back(&model.transform_weight);
        targets.push_back(&model.transform_bias);
    }
    const auto shapes = expected_shapes(model.shape, model.stage);
    std::size_t expected = 0;
    for (const auto& [r, c] : shapes) expected += static_cast<std::size_t>(r * c) * 8;

    std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (payload.size() != expected || payload_bytes != expected)
        throw Error(ErrorKind::CorruptPayload, "model payload holds " + std::to_string(payload.size()) +
                                                   " bytes but the header shapes require " +
                                                   std::to_string(expected));

    const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
    for (std::size_t k = 0; k < targets.size(); ++k) {
        Matrix& m = *targets[k];
        m.resize(shapes[k].first, shapes[k].second);
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j, p += 8) m(i, j) = get_le(p);
    }
    if (model.stage == ModelStage::Pretrained) {
        const auto& s = model.shape;
        model.prompt_tokens = Matrix::Zero(s.num_tokens, s.d_prime);
        model.token_projections = Matrix::Zero(s.num_tokens, s.d_prime);
        model.transform_weight = Matrix::Identity(s.d_hidden, s.d_hidden);
        model.transform_bias = Matrix::Zero(1, s.d_hidden);
    }
    validate(model);
    return model;
}

std::string model_id(const GeneralistModel& model) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ull;
        }
    };
    const Index dims[3] = {model.shape.d_prime, model.shape.d_hidden, model.shape.num_tokens};
    mix(dims, sizeof(dims));
    const int flags[4] = {static_cast<int>(model.stage), static_cast<int>(model.nonlinearity),
                          model.use_transform ? 1 : 0, model.normalize_attributes ? 1 : 0};
    mix(flags, sizeof(flags));
    for (const Matrix* m : {&model.weight, &model.prompt_tokens, &model.token_projections, &model.transform_weight,
                            &model.transform_bias})
        mix(m->data(), static_cast<std::size_t>(m->size()) * sizeof(Real));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace unprompt
