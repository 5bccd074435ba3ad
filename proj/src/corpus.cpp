#include <draglab/corpus.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace draglab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t& pos, const char* what) {
    if (bytes.size() < pos + 4) throw ParseError(std::string("truncated clip file while reading ") + what, pos);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

}  // namespace

std::string encode_clip(const Tensor& frames) {
    if (frames.rank() != 4) throw ArgumentError("clip tensor must have shape [L, H, W, C]");
    std::string out;
    out.reserve(24 + frames.size() * 4);
    out.append(kClipMagic, 4);
    put_u32(out, kClipFormatVersion);
    for (int d = 0; d < 4; ++d) put_u32(out, static_cast<std::uint32_t>(frames.dim(d)));
    for (real v : frames.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return out;
}

Tensor decode_clip(std::string_view bytes) {
    if (bytes.size() < 4) throw ParseError("truncated clip file while reading magic", 0);
    if (std::memcmp(bytes.data(), kClipMagic, 4) != 0) throw ParseError("bad clip magic", 0);
    std::size_t pos = 4;
    const std::uint32_t version = get_u32(bytes, pos, "version");
    if (version != kClipFormatVersion) throw UnsupportedVersionError("clip file", version, kClipFormatVersion);
    Shape shape(4);
    for (int d = 0; d < 4; ++d) {
        const std::uint32_t v = get_u32(bytes, pos, "dimensions");
        if (v == 0 || v > (1u << 16)) throw ParseError("implausible clip dimension " + std::to_string(v), pos - 4);
        shape[d] = static_cast<int>(v);
    }
    const std::size_t count = shape_numel(shape);
    Tensor frames(shape);
    if (bytes.size() < pos + count * 4) {
        throw ParseError("truncated clip file: expected " + std::to_string(count) + " float32 values", bytes.size());
    }
    if (bytes.size() != pos + count * 4) throw ParseError("trailing bytes after clip data", pos + count * 4);
    for (std::size_t i = 0; i < count; ++i) frames[i] = static_cast<real>(std::bit_cast<float>(get_u32(bytes, pos, "data")));
    return frames;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_clip_file(const fs::path& path, const Tensor& frames) { write_file_atomic(path, encode_clip(frames)); }

Tensor read_clip_file(const fs::path& path) { return decode_clip(read_file(path)); }

CorpusClip corpus_clip_from_synthetic(const SyntheticClip& clip, std::string name) {
    CorpusClip out;
    out.name = std::move(name);
    out.video = clip.video;
    out.annotation.frames = clip.video.length();
    out.annotation.height = clip.video.height();
    out.annotation.width = clip.video.width();
    for (std::size_t k = 0; k < clip.trajectories.size(); ++k) {
        AnnotatedEntity e;
        e.id = clip.trajectories[k].entity_id;
        e.mask = clip.frame_masks[k].front();
        e.trajectory = clip.trajectories[k];
        e.frame_masks = clip.frame_masks[k];
        out.annotation.entities.push_back(std::move(e));
    }
    return out;
}

Corpus generate_corpus(const SceneSampler& sampler, int count, std::uint64_t seed) {
    Corpus corpus;
    for (int i = 0; i < count; ++i) {
        const SceneSpec spec = random_scene(sampler, derive_seed(seed, static_cast<std::uint64_t>(i)));
        char name[32];
        std::snprintf(name, sizeof name, "clip_%05d", i);
        corpus.push_back(corpus_clip_from_synthetic(generate_clip(spec), name));
    }
    return corpus;
}

void dataset_write(const fs::path& dir, const Corpus& corpus) {
    fs::create_directories(dir);
    json index{{"format", "drag-lab-corpus"}, {"version", kCorpusFormatVersion}, {"clips", json::array()}};
    for (const auto& clip : corpus) {
        if (clip.name.empty() || clip.name.find('/') != std::string::npos) {
            throw ArgumentError("invalid clip name '" + clip.name + "'");
        }
        write_clip_file(dir / (clip.name + ".drgl"), clip.video.frames);
        write_file_atomic(dir / (clip.name + ".json"), annotation_to_json(clip.annotation).dump());
        index["clips"].push_back(clip.name);
    }
    write_file_atomic(dir / "corpus.json", index.dump(2));
}

Corpus dataset_read(const fs::path& dir) {
    const json index = parse_json(read_file(dir / "corpus.json"));
    if (!index.is_object() || index.value("format", "") != "drag-lab-corpus") {
        throw ParseError("corpus.json is not a drag-lab corpus index", 0);
    }
    const auto version = index.value("version", 0u);
    if (version != kCorpusFormatVersion) throw UnsupportedVersionError("corpus", version, kCorpusFormatVersion);
    Corpus corpus;
    for (const auto& name_doc : index.at("clips")) {
        CorpusClip clip;
        clip.name = name_doc.get<std::string>();
        clip.video.frames = read_clip_file(dir / (clip.name + ".drgl"));
        clip.annotation = parse_annotation(read_file(dir / (clip.name + ".json")));
        const auto& f = clip.video.frames;
        if (f.dim(0) != clip.annotation.frames || f.dim(1) != clip.annotation.height ||
            f.dim(2) != clip.annotation.width || f.dim(3) != 3) {
            throw ParseError("clip '" + clip.name + "' does not match its annotation dimensions", 0);
        }
        corpus.push_back(std::move(clip));
    }
    return corpus;
}

}  // namespace draglab
