#pragma once

#include <draglab/annotation.hpp>
#include <draglab/synth.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace draglab {

inline constexpr char kClipMagic[4] = {'D', 'R', 'G', 'L'};
inline constexpr std::uint32_t kClipFormatVersion = 1;
inline constexpr std::uint32_t kCorpusFormatVersion = 1;

/// Binary clip file: magic "DRGL", then little-endian u32 version, L, H, W, C,
/// then L*H*W*C float32 values in [L, H, W, C] order.
void write_clip_file(const std::filesystem::path& path, const Tensor& frames);
Tensor read_clip_file(const std::filesystem::path& path);
std::string encode_clip(const Tensor& frames);
Tensor decode_clip(std::string_view bytes);

struct CorpusClip {
    std::string name;
    VideoClip video;
    Annotation annotation;

    friend bool operator==(const CorpusClip& a, const CorpusClip& b) {
        return a.name == b.name && a.video.frames.shape() == b.video.frames.shape() &&
               a.video.frames.storage() == b.video.frames.storage() && a.annotation == b.annotation;
    }
};

using Corpus = std::vector<CorpusClip>;

CorpusClip corpus_clip_from_synthetic(const SyntheticClip& clip, std::string name);
Corpus generate_corpus(const SceneSampler& sampler, int count, std::uint64_t seed);

/// Directory layout: corpus.json index plus <name>.drgl and <name>.json per clip.
void dataset_write(const std::filesystem::path& dir, const Corpus& corpus);
Corpus dataset_read(const std::filesystem::path& dir);

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace draglab
