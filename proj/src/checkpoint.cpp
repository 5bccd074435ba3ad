#include <draglab/checkpoint.hpp>
#include <draglab/corpus.hpp>

#include <cstring>
#include <sstream>

namespace draglab {

using nlohmann::json;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_uint(std::string_view bytes, std::size_t offset, int width) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
    return v;
}

void put_tensor(std::string& out, const Tensor& t) {
    const std::size_t start = out.size();
    out.resize(start + t.size() * sizeof(real));
    std::memcpy(out.data() + start, t.data(), t.size() * sizeof(real));
}

json tensor_entry(const std::string& name, const Tensor& t) { return json{{"name", name}, {"shape", t.shape()}}; }

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
    json header{
        {"model", to_json(c.model)},
        {"train", c.train_config},
        {"step", c.step},
        {"rng_state", c.rng_state},
        {"optimizer_steps", c.optimizer_steps},
        {"element_size", sizeof(real)},
    };
    json params = json::array(), m = json::array(), v = json::array();
    for (const auto& p : c.parameters) params.push_back(tensor_entry(p.name, p.value));
    for (const auto& t : c.first_moments) m.push_back(t.shape());
    for (const auto& t : c.second_moments) v.push_back(t.shape());
    header["parameters"] = params;
    header["first_moments"] = m;
    header["second_moments"] = v;
    const std::string text = header.dump();

    std::string out(kCheckpointMagic, 4);
    put_u32(out, kCheckpointVersion);
    put_u64(out, text.size());
    out += text;
    for (const auto& p : c.parameters) put_tensor(out, p.value);
    for (const auto& t : c.first_moments) put_tensor(out, t);
    for (const auto& t : c.second_moments) put_tensor(out, t);
    return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    if (bytes.size() < 16) throw LoadError("checkpoint truncated: " + std::to_string(bytes.size()) + " bytes");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw LoadError("not a checkpoint (bad magic)");
    const auto version = static_cast<std::uint32_t>(get_uint(bytes, 4, 4));
    if (version != kCheckpointVersion) {
        throw LoadError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint64_t header_size = get_uint(bytes, 8, 8);
    if (header_size > bytes.size() - 16) throw LoadError("checkpoint header truncated");
    json header;
    try {
        header = json::parse(bytes.substr(16, header_size));
    } catch (const json::exception& e) {
        throw LoadError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }

    Checkpoint c;
    std::size_t offset = 16 + header_size;
    try {
        c.model = model_config_from_json(header.at("model"));
        c.train_config = header.at("train");
        c.step = header.at("step").get<long long>();
        c.rng_state = header.at("rng_state").get<std::string>();
        c.optimizer_steps = header.at("optimizer_steps").get<long long>();
        const auto element = header.at("element_size").get<std::size_t>();
        if (element != sizeof(float) && element != sizeof(double)) throw LoadError("bad element size");

        auto read_tensor = [&](const Shape& shape) {
            Tensor t(shape);
            const std::size_t nbytes = t.size() * element;
            if (nbytes > bytes.size() - offset) throw LoadError("checkpoint payload truncated");
            const char* src = bytes.data() + offset;
            if (element == sizeof(real)) {
                std::memcpy(t.data(), src, nbytes);
            } else if (element == sizeof(float)) {
                for (std::size_t i = 0; i < t.size(); ++i) {
                    float f;
                    std::memcpy(&f, src + i * sizeof(float), sizeof(float));
                    t[i] = static_cast<real>(f);
                }
            } else {
                for (std::size_t i = 0; i < t.size(); ++i) {
                    double d;
                    std::memcpy(&d, src + i * sizeof(double), sizeof(double));
                    t[i] = static_cast<real>(d);
                }
            }
            offset += nbytes;
            return t;
        };
        for (const auto& p : header.at("parameters")) {
            const auto shape = p.at("shape").get<Shape>();
            c.parameters.push_back({p.at("name").get<std::string>(), read_tensor(shape)});
        }
        for (const auto& s : header.at("first_moments")) c.first_moments.push_back(read_tensor(s.get<Shape>()));
        for (const auto& s : header.at("second_moments")) c.second_moments.push_back(read_tensor(s.get<Shape>()));
    } catch (const json::exception& e) {
        throw LoadError(std::string("checkpoint header malformed: ") + e.what());
    } catch (const ConfigError& e) {
        throw LoadError(std::string("checkpoint model config invalid: ") + e.what());
    }
    if (offset != bytes.size()) throw LoadError("checkpoint has trailing bytes");
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    write_file_atomic(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::string bytes;
    try {
        bytes = read_file(path);
    } catch (const Error& e) {
        throw LoadError(e.what());
    }
    return decode_checkpoint(bytes);
}

Checkpoint snapshot_model(const DragModel& model) {
    Checkpoint c;
    c.model = model.config();
    for (const auto& p : model.parameters().params()) c.parameters.push_back({p->name, p->value});
    return c;
}

void restore_parameters(DragModel& model, const Checkpoint& checkpoint) {
    auto& params = model.parameters().params();
    if (checkpoint.parameters.size() != params.size()) {
        throw LoadError("checkpoint has " + std::to_string(checkpoint.parameters.size()) + " tensors, model expects " +
                        std::to_string(params.size()));
    }
    for (const auto& entry : checkpoint.parameters) {
        nn::Parameter* p = model.parameters().find(entry.name);
        if (!p) throw LoadError("checkpoint tensor '" + entry.name + "' is unknown to the model");
        if (p->value.shape() != entry.value.shape()) {
            throw LoadError("checkpoint tensor '" + entry.name + "' has shape " + shape_string(entry.value.shape()) +
                            ", model expects " + shape_string(p->value.shape()));
        }
        p->value = entry.value;
    }
}

std::unique_ptr<DragModel> model_from_checkpoint(const Checkpoint& checkpoint) {
    auto model = std::make_unique<DragModel>(checkpoint.model);
    restore_parameters(*model, checkpoint);
    return model;
}

std::string config_hash(const json& config) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : config.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << h;
    return out.str();
}

}  // namespace draglab
