// SPDX-License-Identifier: Apache-2.0
//
// Class prompts and seeded "random sentence" augmentation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dcca {

/// splitmix64. Fixed constants, so streams are reproducible in any language.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Index in [0, n) from exactly one draw (multiply-high mapping).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; consumes two draws per call.
  double normal();

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

enum class TemplateId { Plain, WaffleWords, WaffleChars };

std::string_view template_name(TemplateId id);
TemplateId parse_template(std::string_view name);

/// Characters a waffle_chars noise segment is drawn from.
inline constexpr std::string_view kNoiseAlphabet =
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789!#$%&*+?@";

/// "a photo of a <class>"; throws EmptyClassName for blank input.
std::string make_original_prompt(std::string_view class_name);

/// k augmented prompts for one class. waffle_chars appends len(class_name)
/// noise characters; waffle_words appends "which has <word>".
std::vector<std::string> make_random_sentences(std::string_view class_name, TemplateId tmpl,
                                               std::size_t k, SplitMix64& rng,
                                               const std::vector<std::string>* wordlist = nullptr);

struct PromptSet {
  std::vector<std::string> class_names;
  TemplateId tmpl = TemplateId::WaffleChars;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> originals;  // one per class
  std::vector<std::string> randoms;    // k per class, class-major

  std::size_t n_classes() const { return class_names.size(); }
};

/// Class c draws from SplitMix64(splitmix64(seed ^ c)).
PromptSet build_prompt_set(const std::vector<std::string>& class_names, TemplateId tmpl,
                           std::size_t k, std::uint64_t seed,
                           const std::vector<std::string>* wordlist = nullptr);

std::uint64_t class_stream_state(std::uint64_t seed, std::uint64_t class_index);

/// Splits an augmented prompt into (class part, noise part). Returns nullopt for
/// text that does not start with "a photo of a ".
struct ParsedPrompt {
  std::string class_name;
  std::string noise;  // empty for plain prompts
};
std::optional<ParsedPrompt> parse_prompt(std::string_view text,
                                         const std::vector<std::string>& class_names);

/// Number of UTF-8 code points.
std::size_t text_length(std::string_view s);

// Line-delimited JSON: originals first, then randoms in class-major order.
// A sibling "<stem>.meta.json" keeps template, k and seed.
void write_prompt_set(const PromptSet& set, const std::filesystem::path& path);
PromptSet read_prompt_set(const std::filesystem::path& path);
std::filesystem::path prompt_meta_path(const std::filesystem::path& path);

}  // namespace dcca
