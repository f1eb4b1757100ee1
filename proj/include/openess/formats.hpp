#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "openess/distill.hpp"
#include "openess/embedding.hpp"
#include "openess/encoder.hpp"
#include "openess/events.hpp"
#include "openess/superpixel.hpp"
#include "openess/tensor.hpp"

// Binary file formats, all little-endian:
//   EVT1  event stream: "EVT1", W u32, H u32, N u64, N x {t u64, x u16,
//         y u16, p i8, pad u8}. A text variant starts "EVT1t W H" followed
//         by one "t x y p" line per event.
//   MASK1 superpixel map: "MASK1", H u32, W u32, H*W u32 labels row-major
//         (0xFFFFFFFF = unassigned).
//   FMAP1 feature map: "FMAP1", D u32, H u32, W u32, D*H*W f32 [d][h][w].
//   TEMB1 text embeddings: "TEMB1", Z u32, D u32, Z x {len u16, name, D f32}.
//   LBL1  label map: "LBL1", H u32, W u32, H*W u8 (255 = ignore).
//   ENC1  parameters: "ENC1", layer count u32, per layer {in u32, out u32,
//         kh u32, kw u32}, then per layer f32 weights ([out][in][kh][kw])
//         and f32 biases.

namespace openess::formats {

events::EventStream read_evt1(std::istream& in);
events::EventStream read_evt1_file(const std::string& path);
void write_evt1(std::ostream& out, const events::EventStream& stream);
void write_evt1_text(std::ostream& out, const events::EventStream& stream);
void write_evt1_file(const std::string& path, const events::EventStream& stream);

superpixel::SuperpixelMap read_mask1(std::istream& in,
                                     std::optional<std::uint32_t> strict_segments = {});
superpixel::SuperpixelMap read_mask1_file(const std::string& path,
                                          std::optional<std::uint32_t> strict_segments = {});
void write_mask1(std::ostream& out, const superpixel::SuperpixelMap& map);
void write_mask1_file(const std::string& path, const superpixel::SuperpixelMap& map);

FeatureMap read_fmap1(std::istream& in, bool strict_finite = true);
FeatureMap read_fmap1_file(const std::string& path, bool strict_finite = true);
void write_fmap1(std::ostream& out, const FeatureMap& map);
void write_fmap1_file(const std::string& path, const FeatureMap& map);

embedding::TextEmbeddingSet read_temb1(std::istream& in);
embedding::TextEmbeddingSet read_temb1_file(const std::string& path);
void write_temb1(std::ostream& out, const embedding::TextEmbeddingSet& set);
void write_temb1_file(const std::string& path, const embedding::TextEmbeddingSet& set);

LabelMap read_lbl1(std::istream& in);
LabelMap read_lbl1_file(const std::string& path);
void write_lbl1(std::ostream& out, const LabelMap& map);
void write_lbl1_file(const std::string& path, const LabelMap& map);

encoder::EncoderParams read_enc1(std::istream& in);
encoder::EncoderParams read_enc1_file(const std::string& path);
void write_enc1(std::ostream& out, const encoder::EncoderParams& params);
void write_enc1_file(const std::string& path, const encoder::EncoderParams& params);

distill::ProjectionHead read_head_file(const std::string& path);
void write_head_file(const std::string& path, const distill::ProjectionHead& head);

/// 8-bit binary PGM (P5). Values are clamped to [0, 255] on write; reading
/// yields a single-channel map with values in [0, maxval].
FeatureMap read_pgm(std::istream& in);
FeatureMap read_pgm_file(const std::string& path);
void write_pgm(std::ostream& out, const FeatureMap& image);
void write_pgm_file(const std::string& path, const FeatureMap& image);

/// Similarity map in [-1, 1] mapped linearly onto [0, 255].
void write_similarity_pgm_file(const std::string& path, const FeatureMap& similarity);

/// Reads either a PGM or an FMAP1 file, keyed on the magic bytes.
FeatureMap read_image_or_fmap(const std::string& path);

}  // namespace openess::formats
