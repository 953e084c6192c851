// SPDX-License-Identifier: Apache-2.0

#include "dcca/prompts.hpp"

#include <cmath>
#include <fstream>
#include "json.hpp"
#include <numbers>
#include <set>

#include "dcca/error.hpp"

namespace dcca {

namespace {

constexpr std::string_view kPrefix = "a photo of a ";

std::string trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

double SplitMix64::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string_view template_name(TemplateId id) {
  switch (id) {
    case TemplateId::Plain:
      return "plain";
    case TemplateId::WaffleWords:
      return "waffle_words";
    case TemplateId::WaffleChars:
      return "waffle_chars";
  }
  return "plain";
}

TemplateId parse_template(std::string_view name) {
  if (name == "plain") return TemplateId::Plain;
  if (name == "waffle_words") return TemplateId::WaffleWords;
  if (name == "waffle_chars") return TemplateId::WaffleChars;
  throw_usage("UnknownTemplate", "unknown prompt template '" + std::string(name) + "'");
}

std::size_t text_length(std::string_view s) {
  std::size_t n = 0;
  for (const char c : s) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string make_original_prompt(std::string_view class_name) {
  const std::string name = trim(class_name);
  if (name.empty()) throw_data("EmptyClassName", "class name is empty");
  return std::string(kPrefix) + name;
}

std::vector<std::string> make_random_sentences(std::string_view class_name, TemplateId tmpl,
                                               std::size_t k, SplitMix64& rng,
                                               const std::vector<std::string>* wordlist) {
  if (k == 0) throw_data("ZeroK", "number of random sentences must be >= 1");
  const std::string base = make_original_prompt(class_name);
  const std::size_t noise_len = text_length(trim(class_name));

  std::vector<std::string> out;
  out.reserve(k);
  switch (tmpl) {
    case TemplateId::Plain:
      out.assign(k, base);
      break;
    case TemplateId::WaffleWords: {
      if (wordlist == nullptr || wordlist->empty()) {
        throw_data("MissingWordlist", "waffle_words needs a non-empty wordlist");
      }
      for (std::size_t i = 0; i < k; ++i) {
        out.push_back(base + ", which has " + (*wordlist)[rng.below(wordlist->size())]);
      }
      break;
    }
    case TemplateId::WaffleChars: {
      for (std::size_t i = 0; i < k; ++i) {
        std::string s = base + ", ";
        for (std::size_t c = 0; c < noise_len; ++c) {
          s.push_back(kNoiseAlphabet[rng.below(kNoiseAlphabet.size())]);
        }
        out.push_back(std::move(s));
      }
      break;
    }
  }
  return out;
}

std::uint64_t class_stream_state(std::uint64_t seed, std::uint64_t class_index) {
  return SplitMix64(seed ^ class_index).next();
}

PromptSet build_prompt_set(const std::vector<std::string>& class_names, TemplateId tmpl,
                           std::size_t k, std::uint64_t seed,
                           const std::vector<std::string>* wordlist) {
  if (class_names.size() < 2) throw_data("TooFewClasses", "need at least two class names");
  if (k == 0) throw_data("ZeroK", "number of random sentences must be >= 1");
  PromptSet set;
  std::set<std::string> seen;
  for (const auto& raw : class_names) {
    const std::string name = trim(raw);
    if (name.empty()) throw_data("EmptyClassName", "class name is empty");
    if (!seen.insert(name).second) {
      throw_data("DuplicateClassNames", "class name '" + name + "' appears more than once");
    }
    set.class_names.push_back(name);
  }
  set.tmpl = tmpl;
  set.k = k;
  set.seed = seed;
  set.randoms.reserve(k * set.class_names.size());
  for (std::size_t c = 0; c < set.class_names.size(); ++c) {
    set.originals.push_back(make_original_prompt(set.class_names[c]));
    SplitMix64 rng(class_stream_state(seed, c));
    auto sentences = make_random_sentences(set.class_names[c], tmpl, k, rng, wordlist);
    for (auto& s : sentences) set.randoms.push_back(std::move(s));
  }
  return set;
}

std::optional<ParsedPrompt> parse_prompt(std::string_view text,
                                         const std::vector<std::string>& class_names) {
  if (text.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  const std::string_view rest = text.substr(kPrefix.size());
  // Longest matching class name wins, so "sea bird" beats "sea".
  std::optional<ParsedPrompt> best;
  std::size_t best_len = 0;
  for (const auto& name : class_names) {
    if (rest.substr(0, name.size()) != name || name.size() < best_len) continue;
    const std::string_view tail = rest.substr(name.size());
    ParsedPrompt p;
    p.class_name = name;
    if (tail.empty()) {
      p.noise.clear();
    } else if (tail.substr(0, 2) == ", ") {
      p.noise = std::string(tail.substr(2));
    } else {
      continue;
    }
    best = std::move(p);
    best_len = name.size();
  }
  return best;
}

std::filesystem::path prompt_meta_path(const std::filesystem::path& path) {
  std::filesystem::path meta = path;
  meta.replace_extension(".meta.json");
  return meta;
}

void write_prompt_set(const PromptSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("IoError", "cannot open " + path.string() + " for writing");
  const std::size_t n = set.class_names.size();
  for (std::size_t c = 0; c < n; ++c) {
    nlohmann::json rec = {{"class_index", c},
                          {"class_name", set.class_names[c]},
                          {"kind", "original"},
                          {"sentence_index", 0},
                          {"text", set.originals[c]}};
    out << rec.dump() << '\n';
  }
  for (std::size_t i = 0; i < set.randoms.size(); ++i) {
    const std::size_t c = i / set.k;
    nlohmann::json rec = {{"class_index", c},
                          {"class_name", set.class_names[c]},
                          {"kind", "random"},
                          {"sentence_index", i % set.k},
                          {"text", set.randoms[i]}};
    out << rec.dump() << '\n';
  }
  if (!out) throw_data("IoError", "failed writing " + path.string());

  nlohmann::json meta = {{"template", template_name(set.tmpl)},
                         {"k", set.k},
                         {"seed", set.seed},
                         {"class_names", set.class_names}};
  std::ofstream mout(prompt_meta_path(path), std::ios::binary | std::ios::trunc);
  mout << meta.dump(2) << '\n';
}

PromptSet read_prompt_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("IoError", "cannot open " + path.string());
  PromptSet set;
  std::vector<std::vector<std::string>> per_class;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw_data("InputParseError", path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const auto c = rec.at("class_index").get<std::size_t>();
    if (c >= per_class.size()) {
      per_class.resize(c + 1);
      set.class_names.resize(c + 1);
      set.originals.resize(c + 1);
    }
    set.class_names[c] = rec.at("class_name").get<std::string>();
    const auto kind = rec.at("kind").get<std::string>();
    if (kind == "original") {
      set.originals[c] = rec.at("text").get<std::string>();
    } else if (kind == "random") {
      per_class[c].push_back(rec.at("text").get<std::string>());
    } else {
      throw_data("InputParseError", "unknown record kind '" + kind + "'");
    }
  }
  set.k = per_class.empty() ? 0 : per_class.front().size();
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    if (per_class[c].size() != set.k) {
      throw_data("AlignmentError", "class " + std::to_string(c) + " has " +
                                       std::to_string(per_class[c].size()) +
                                       " random sentences, expected " + std::to_string(set.k));
    }
    for (auto& s : per_class[c]) set.randoms.push_back(std::move(s));
  }

  const auto meta_path = prompt_meta_path(path);
  if (std::filesystem::exists(meta_path)) {
    std::ifstream min(meta_path);
    const auto meta = nlohmann::json::parse(min);
    set.tmpl = parse_template(meta.value("template", std::string("waffle_chars")));
    set.seed = meta.value("seed", std::uint64_t{0});
  }
  return set;
}

}  // namespace dcca
