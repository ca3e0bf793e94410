#include "tgseg/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "tgseg/data/btsr.hpp"
#include "tgseg/util/rng.hpp"

namespace tgseg::data {

namespace {

ad::TensorF load_part(const std::filesystem::path& root, const std::string& id,
                      const char* suffix) {
  const auto path = root / (id + suffix);
  if (!std::filesystem::exists(path))
    throw DataError(DataErrorKind::missing_file,
                    "sample '" + id + "' is missing " + path.filename().string());
  return read_tensor_file(path);
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& root) {
  const auto manifest_path = root / "manifest.tsv";
  std::ifstream in(manifest_path);
  if (!in)
    throw DataError(DataErrorKind::bad_manifest,
                    "cannot open " + manifest_path.string());
  std::string line;
  if (!std::getline(in, line) || line != "id\tsplit")
    throw DataError(DataErrorKind::bad_manifest,
                    "manifest header must be 'id<TAB>split' in " +
                        manifest_path.string());
  Dataset d;
  std::set<std::string> seen;
  std::size_t text_dim = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(DataErrorKind::bad_manifest,
                      "manifest row without tab: '" + line + "'");
    Sample s;
    s.id = line.substr(0, tab);
    s.split = line.substr(tab + 1);
    if (!seen.insert(s.id).second)
      throw DataError(DataErrorKind::duplicate_id, "duplicate id '" + s.id + "'");
    s.image = load_part(root, s.id, ".img.btsr");
    s.mask = load_part(root, s.id, ".mask.btsr");
    s.text = load_part(root, s.id, ".txt.btsr");
    for (float v : s.image.data)
      if (!(v >= 0.0f && v <= 1.0f))
        throw DataError(DataErrorKind::image_out_of_range,
                        "sample '" + s.id + "' has image value " + std::to_string(v));
    for (float v : s.mask.data)
      if (v != 0.0f && v != 1.0f)
        throw DataError(DataErrorKind::non_binary_mask,
                        "sample '" + s.id + "' has mask value " + std::to_string(v));
    if (text_dim == 0) {
      text_dim = s.text.numel();
    } else if (s.text.numel() != text_dim) {
      throw DataError(DataErrorKind::inconsistent_text_dim,
                      "sample '" + s.id + "' has text dim " +
                          std::to_string(s.text.numel()) + ", expected " +
                          std::to_string(text_dim));
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  std::ostringstream manifest;
  manifest << "id\tsplit\n";
  for (const auto& s : d.samples) {
    write_tensor_file(s.image, root / (s.id + ".img.btsr"));
    write_tensor_file(s.mask, root / (s.id + ".mask.btsr"));
    write_tensor_file(s.text, root / (s.id + ".txt.btsr"));
    manifest << s.id << '\t' << s.split << '\n';
  }
  std::ofstream out(root / "manifest.tsv", std::ios::trunc);
  out << manifest.str();
}

std::size_t subsample_count(double fraction, std::size_t n) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw DataError(DataErrorKind::bad_fraction,
                    "fraction " + std::to_string(fraction) + " outside (0,1]");
  const auto k = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n)));
  return std::max<std::size_t>(1, std::min(k, n));
}

Dataset subsample(const Dataset& d, double fraction, std::uint64_t seed) {
  const std::size_t k = subsample_count(fraction, d.size());
  if (fraction == 1.0) return d;
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "subsample"));
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  Dataset out;
  out.samples.reserve(k);
  for (std::size_t i : idx) out.samples.push_back(d.samples[i]);
  return out;
}

}  // namespace tgseg::data
