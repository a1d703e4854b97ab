#include "fmim/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>

#include "fmim/binary_io.hpp"
#include "fmim/common.hpp"
#include "fmim/csv.hpp"

namespace fmim {

void Dataset::push_back(std::span<const float> image, std::size_t label) {
  require(image.size() == shape.pixels(), "Dataset: image size does not match shape");
  pixels.insert(pixels.end(), image.begin(), image.end());
  labels.push_back(label);
}

void Dataset::validate() const {
  require(pixels.size() == labels.size() * shape.pixels(),
          "Dataset: pixel buffer does not match label count");
  for (const auto y : labels) require(y < classes, "Dataset: label out of range");
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(classes, 0);
  for (const auto y : labels) ++counts.at(y);
  return counts;
}

// ---- synthetic generator --------------------------------------------------

namespace {

void draw_grating(std::size_t label, const SynthOptions& o, Rng& rng, std::vector<float>& img) {
  const auto& s = o.shape;
  const double band = std::numbers::pi / static_cast<double>(o.classes);
  const double theta = static_cast<double>(label) * band + rng.uniform(-band / 3.0, band / 3.0);
  const double freq = rng.uniform(0.15, 0.3);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi * o.phase_spread);
  const double contrast = rng.uniform(0.6, 1.0);
  const double cx = (static_cast<double>(s.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(s.height) - 1.0) / 2.0;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      const double u = static_cast<double>(x) - cx;
      const double v = static_cast<double>(y) - cy;
      const double wave = std::sin(2.0 * std::numbers::pi * freq * (u * ct + v * st) + phase);
      for (std::size_t c = 0; c < s.channels; ++c) {
        const double tint = 1.0 - 0.1 * static_cast<double>(c);
        double value = 0.5 + 0.5 * contrast * tint * wave;
        if (o.noise > 0.0) value += o.noise * rng.normal();
        img[(y * s.width + x) * s.channels + c] =
            static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
  }
}

Dataset make_split(const SynthOptions& o, std::size_t per_class, Split split, std::uint64_t tag) {
  Dataset ds;
  ds.shape = o.shape;
  ds.classes = o.classes;
  ds.split = split;
  std::vector<float> img(o.shape.pixels());
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t j = 0; j < o.classes; ++j) {
      auto rng = Rng::derive(o.seed, Stream::synth, {tag, j, i});
      draw_grating(j, o, rng, img);
      ds.push_back(img, j);
    }
  }
  return ds;
}

}  // namespace

SynthData synth_dataset(const SynthOptions& options) {
  require(options.classes >= 2, "synth_dataset: at least two classes required");
  require(options.shape.pixels() > 0, "synth_dataset: empty image shape");
  SynthData out;
  out.train = make_split(options, options.train_per_class, Split::train, 0);
  out.public_pool = make_split(options, options.test_per_class, Split::train, 1);
  out.test = make_split(options, options.test_per_class, Split::test, 2);
  return out;
}

// ---- partitioning --------------------------------------------------------

std::vector<std::size_t> largest_remainder(std::span<const double> shares, std::size_t total) {
  require(!shares.empty(), "largest_remainder: no shares");
  std::vector<std::size_t> counts(shares.size(), 0);
  std::vector<double> rest(shares.size(), 0.0);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < shares.size(); ++k) {
    const double exact = shares[k] * static_cast<double>(total);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    rest[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  require(assigned <= total, "largest_remainder: shares exceed one");
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rest[a] > rest[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[order[i % order.size()]];
  return counts;
}

namespace {

Partition draw_partition(const Dataset& ds, const PartitionSpec& spec, std::uint64_t attempt) {
  auto rng = Rng::derive(spec.seed, Stream::partition, {attempt});
  std::vector<std::vector<std::size_t>> by_class(ds.classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  Partition part;
  part.clients.resize(spec.clients);
  part.proportions.assign(ds.classes, std::vector<double>(spec.clients, 0.0));
  for (std::size_t j = 0; j < ds.classes; ++j) {
    auto& p = part.proportions[j];
    double total = 0.0;
    for (auto& v : p) {
      v = rng.gamma(spec.alpha);
      total += v;
    }
    if (total > 0.0) {
      for (auto& v : p) v /= total;
    } else {
      // every gamma draw underflowed (tiny alpha): the class goes to one client
      p[static_cast<std::size_t>(rng.below(spec.clients))] = 1.0;
    }
    auto& members = by_class[j];
    rng.shuffle(std::span(members));
    const auto counts = largest_remainder(p, members.size());
    std::size_t offset = 0;
    for (std::size_t k = 0; k < spec.clients; ++k) {
      part.clients[k].insert(part.clients[k].end(), members.begin() + offset,
                             members.begin() + offset + counts[k]);
      offset += counts[k];
    }
  }
  for (auto& c : part.clients) std::sort(c.begin(), c.end());
  return part;
}

}  // namespace

Partition dirichlet_partition(const Dataset& dataset, const PartitionSpec& spec) {
  require(spec.alpha > 0.0, "dirichlet_partition: alpha must be positive");
  require(spec.clients >= 1, "dirichlet_partition: at least one client required");
  const auto counts = dataset.class_counts();
  for (const auto c : counts) require(c >= 1, "dirichlet_partition: every class needs an instance");
  Partition part = draw_partition(dataset, spec, 0);
  for (std::uint64_t attempt = 1; spec.resample_empty && attempt < 100; ++attempt) {
    const bool has_empty = std::any_of(part.clients.begin(), part.clients.end(),
                                       [](const auto& c) { return c.empty(); });
    if (!has_empty) break;
    part = draw_partition(dataset, spec, attempt);
  }
  return part;
}

Partition iid_partition(const Dataset& dataset, std::size_t clients, std::uint64_t seed) {
  require(clients >= 1, "iid_partition: at least one client required");
  auto rng = Rng::derive(seed, Stream::partition, {~std::uint64_t{0}});
  const std::vector<double> shares(clients, 1.0 / static_cast<double>(clients));
  Partition part;
  part.clients.resize(clients);
  part.proportions.assign(dataset.classes, shares);
  std::vector<std::vector<std::size_t>> by_class(dataset.classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.labels[i]].push_back(i);
  for (auto& members : by_class) {
    rng.shuffle(std::span(members));
    const auto counts = largest_remainder(shares, members.size());
    std::size_t offset = 0;
    for (std::size_t k = 0; k < clients; ++k) {
      part.clients[k].insert(part.clients[k].end(), members.begin() + offset,
                             members.begin() + offset + counts[k]);
      offset += counts[k];
    }
  }
  for (auto& c : part.clients) std::sort(c.begin(), c.end());
  return part;
}

std::vector<ClientSplit> subsample_labels(const Partition& partition, const Dataset& dataset,
                                          double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, "subsample_labels: fraction must lie in (0, 1]");
  std::vector<ClientSplit> out(partition.client_count());
  for (std::size_t k = 0; k < partition.client_count(); ++k) {
    std::vector<std::vector<std::size_t>> by_class(dataset.classes);
    for (const auto i : partition.clients[k]) by_class.at(dataset.labels.at(i)).push_back(i);
    for (std::size_t j = 0; j < dataset.classes; ++j) {
      auto& members = by_class[j];
      auto rng = Rng::derive(seed, Stream::labels, {k, j});
      rng.shuffle(std::span(members));
      const std::size_t take = std::min(members.size(), round_half_up(fraction, members.size()));
      out[k].labeled.insert(out[k].labeled.end(), members.begin(), members.begin() + take);
      out[k].unlabeled.insert(out[k].unlabeled.end(), members.begin() + take, members.end());
    }
    std::sort(out[k].labeled.begin(), out[k].labeled.end());
    std::sort(out[k].unlabeled.begin(), out[k].unlabeled.end());
  }
  return out;
}

// ---- augmentation --------------------------------------------------------

bool AugmentPolicy::is_identity() const {
  return scale_lo == 1.0 && scale_hi == 1.0 && crop_height == 0 && crop_width == 0 &&
         flip_probability == 0.0 && rotation_degrees == 0.0 && color_jitter == 0.0 &&
         grayscale_probability == 0.0;
}

ImageShape augmented_shape(const ImageShape& shape, const AugmentPolicy& policy) {
  return {policy.crop_height ? policy.crop_height : shape.height,
          policy.crop_width ? policy.crop_width : shape.width, shape.channels};
}

namespace {

float sample_bilinear(std::span<const float> img, const ImageShape& s, double y, double x,
                      std::size_t c) {
  y = std::clamp(y, 0.0, static_cast<double>(s.height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(s.width - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, s.height - 1);
  const std::size_t x1 = std::min(x0 + 1, s.width - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  auto at = [&](std::size_t yy, std::size_t xx) {
    return static_cast<double>(img[(yy * s.width + xx) * s.channels + c]);
  };
  const double top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
  const double bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
  return static_cast<float>(top * (1.0 - fy) + bottom * fy);
}

}  // namespace

std::vector<float> augment(std::span<const float> image, const ImageShape& shape,
                           const AugmentPolicy& policy, Rng& rng) {
  require(image.size() == shape.pixels(), "augment: image size does not match shape");
  require(policy.scale_lo > 0.0 && policy.scale_lo <= policy.scale_hi,
          "augment: invalid scale range");
  const ImageShape out_shape = augmented_shape(shape, policy);

  // 1. rescale
  const double factor = rng.uniform(policy.scale_lo, policy.scale_hi);
  ImageShape scaled = shape;
  std::vector<float> work(image.begin(), image.end());
  if (factor != 1.0) {
    scaled.height = static_cast<std::size_t>(std::lround(static_cast<double>(shape.height) * factor));
    scaled.width = static_cast<std::size_t>(std::lround(static_cast<double>(shape.width) * factor));
    require(scaled.height >= out_shape.height && scaled.width >= out_shape.width,
            "augment: crop larger than scaled image");
    if (scaled.height != shape.height || scaled.width != shape.width) {
      std::vector<float> resized(scaled.pixels());
      const double sy = static_cast<double>(shape.height) / static_cast<double>(scaled.height);
      const double sx = static_cast<double>(shape.width) / static_cast<double>(scaled.width);
      for (std::size_t y = 0; y < scaled.height; ++y)
        for (std::size_t x = 0; x < scaled.width; ++x)
          for (std::size_t c = 0; c < shape.channels; ++c)
            resized[(y * scaled.width + x) * shape.channels + c] = sample_bilinear(
                image, shape, (static_cast<double>(y) + 0.5) * sy - 0.5,
                (static_cast<double>(x) + 0.5) * sx - 0.5, c);
      work = std::move(resized);
    }
  }
  require(scaled.height >= out_shape.height && scaled.width >= out_shape.width,
          "augment: crop larger than scaled image");

  // 2. crop
  const auto top = static_cast<std::size_t>(rng.below(scaled.height - out_shape.height + 1));
  const auto left = static_cast<std::size_t>(rng.below(scaled.width - out_shape.width + 1));
  std::vector<float> out(out_shape.pixels());
  for (std::size_t y = 0; y < out_shape.height; ++y)
    for (std::size_t x = 0; x < out_shape.width; ++x)
      for (std::size_t c = 0; c < shape.channels; ++c)
        out[(y * out_shape.width + x) * shape.channels + c] =
            work[((y + top) * scaled.width + x + left) * shape.channels + c];

  // 3. horizontal flip
  if (rng.bernoulli(policy.flip_probability)) {
    for (std::size_t y = 0; y < out_shape.height; ++y)
      for (std::size_t x = 0; x < out_shape.width / 2; ++x)
        for (std::size_t c = 0; c < shape.channels; ++c)
          std::swap(out[(y * out_shape.width + x) * shape.channels + c],
                    out[(y * out_shape.width + out_shape.width - 1 - x) * shape.channels + c]);
  }

  // 4. rotation about the centre, clamp-to-edge sampling
  if (policy.rotation_degrees > 0.0) {
    const double angle =
        rng.uniform(-policy.rotation_degrees, policy.rotation_degrees) * std::numbers::pi / 180.0;
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    const double cy = (static_cast<double>(out_shape.height) - 1.0) / 2.0;
    const double cx = (static_cast<double>(out_shape.width) - 1.0) / 2.0;
    const std::vector<float> src = out;
    for (std::size_t y = 0; y < out_shape.height; ++y) {
      for (std::size_t x = 0; x < out_shape.width; ++x) {
        const double dy = static_cast<double>(y) - cy;
        const double dx = static_cast<double>(x) - cx;
        const double sy = ca * dy + sa * dx + cy;
        const double sx = -sa * dy + ca * dx + cx;
        for (std::size_t c = 0; c < shape.channels; ++c)
          out[(y * out_shape.width + x) * shape.channels + c] =
              sample_bilinear(src, out_shape, sy, sx, c);
      }
    }
  }

  // 5. colour jitter (brightness and contrast)
  if (policy.color_jitter > 0.0) {
    const double brightness = rng.uniform(1.0 - policy.color_jitter, 1.0 + policy.color_jitter);
    const double contrast = rng.uniform(1.0 - policy.color_jitter, 1.0 + policy.color_jitter);
    double mean = 0.0;
    for (const auto v : out) mean += v;
    mean /= static_cast<double>(out.size());
    for (auto& v : out)
      v = static_cast<float>(((static_cast<double>(v) - mean) * contrast + mean) * brightness);
  }

  // 6. grayscale
  if (policy.grayscale_probability > 0.0 && rng.bernoulli(policy.grayscale_probability) &&
      shape.channels > 1) {
    for (std::size_t p = 0; p < out_shape.height * out_shape.width; ++p) {
      double mean = 0.0;
      for (std::size_t c = 0; c < shape.channels; ++c) mean += out[p * shape.channels + c];
      mean /= static_cast<double>(shape.channels);
      for (std::size_t c = 0; c < shape.channels; ++c)
        out[p * shape.channels + c] = static_cast<float>(mean);
    }
  }

  for (auto& v : out) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

// ---- file formats -----------------------------------------------------------

void write_images(const std::filesystem::path& path, const Dataset& dataset, PixelType type) {
  dataset.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("images: cannot open " + path.string());
  BinaryWriter w(out);
  w.bytes("FIMG", 4);
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(dataset.size()));
  w.u16(static_cast<std::uint16_t>(dataset.shape.height));
  w.u16(static_cast<std::uint16_t>(dataset.shape.width));
  w.u8(static_cast<std::uint8_t>(dataset.shape.channels));
  w.u8(static_cast<std::uint8_t>(type));
  for (const float v : dataset.pixels) {
    if (type == PixelType::u8)
      w.u8(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    else
      w.f32(v);
  }
  if (!out) throw FormatError("images: write failed for " + path.string());
}

Dataset read_images(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("images: cannot open " + path.string());
  BinaryReader r(in, "images");
  char magic[4];
  r.bytes(magic, 4);
  if (std::string_view(magic, 4) != "FIMG") throw FormatError("images: bad magic");
  if (const auto v = r.u32(); v != 1) throw FormatError("images: unsupported version");
  Dataset ds;
  const auto count = r.u32();
  ds.shape.height = r.u16();
  ds.shape.width = r.u16();
  ds.shape.channels = r.u8();
  const auto type = r.u8();
  if (type != static_cast<std::uint8_t>(PixelType::u8) &&
      type != static_cast<std::uint8_t>(PixelType::f32))
    throw FormatError("images: unknown dtype tag");
  ds.pixels.resize(static_cast<std::size_t>(count) * ds.shape.pixels());
  for (auto& v : ds.pixels)
    v = type == static_cast<std::uint8_t>(PixelType::u8) ? static_cast<float>(r.u8()) / 255.0f
                                                         : r.f32();
  ds.labels.assign(count, 0);
  ds.classes = 1;
  return ds;
}

void write_labels(const std::filesystem::path& path, const Dataset& dataset,
                  const Partition* partition) {
  std::vector<std::string> owner(dataset.size());
  if (partition)
    for (std::size_t k = 0; k < partition->client_count(); ++k)
      for (const auto i : partition->clients[k]) owner.at(i) = csv::format_number(std::uint64_t{k});
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("labels: cannot open " + path.string());
  csv::write_row(out, {"index", "label", "client_id"});
  for (std::size_t i = 0; i < dataset.size(); ++i)
    csv::write_row(out, {csv::format_number(std::uint64_t{i}),
                         csv::format_number(std::uint64_t{dataset.labels[i]}), owner[i]});
}

void read_labels(const std::filesystem::path& path, Dataset& dataset) {
  std::ifstream in(path);
  if (!in) throw FormatError("labels: cannot open " + path.string());
  const auto header = csv::read_row(in);
  if (!header || header->size() < 2 || (*header)[0] != "index" || (*header)[1] != "label")
    throw FormatError("labels: expected header index,label[,client_id]");
  std::vector<bool> seen(dataset.size(), false);
  std::size_t max_label = 0;
  std::size_t line = 1;
  while (auto row = csv::read_row(in)) {
    ++line;
    if (row->size() == 1 && (*row)[0].empty()) continue;
    const auto idx = row->size() >= 2 ? csv::parse_uint((*row)[0]) : std::nullopt;
    const auto label = row->size() >= 2 ? csv::parse_uint((*row)[1]) : std::nullopt;
    if (!idx || !label || *idx >= dataset.size())
      throw FormatError("labels: malformed row at line " + std::to_string(line));
    dataset.labels[*idx] = *label;
    seen[*idx] = true;
    max_label = std::max<std::size_t>(max_label, *label);
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw FormatError("labels: some images have no label");
  dataset.classes = std::max(dataset.classes, max_label + 1);
}

void write_manifest(const std::filesystem::path& path, const Partition& partition) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("manifest: cannot open " + path.string());
  csv::write_row(out, {"client_id", "dataset_index"});
  for (std::size_t k = 0; k < partition.client_count(); ++k)
    for (const auto i : partition.clients[k])
      csv::write_row(out, {csv::format_number(std::uint64_t{k}), csv::format_number(std::uint64_t{i})});
}

Partition read_manifest(const std::filesystem::path& path, const Dataset& dataset) {
  std::ifstream in(path);
  if (!in) throw FormatError("manifest: cannot open " + path.string());
  const auto header = csv::read_row(in);
  if (!header || header->size() != 2 || (*header)[0] != "client_id" ||
      (*header)[1] != "dataset_index")
    throw FormatError("manifest: expected header client_id,dataset_index");
  std::map<std::size_t, std::vector<std::size_t>> groups;
  std::vector<bool> seen(dataset.size(), false);
  std::size_t line = 1;
  while (auto row = csv::read_row(in)) {
    ++line;
    if (row->size() == 1 && (*row)[0].empty()) continue;
    const auto k = row->size() == 2 ? csv::parse_uint((*row)[0]) : std::nullopt;
    const auto i = row->size() == 2 ? csv::parse_uint((*row)[1]) : std::nullopt;
    if (!k || !i || *i >= dataset.size())
      throw FormatError("manifest: malformed row at line " + std::to_string(line));
    if (seen[*i]) throw FormatError("manifest: index assigned twice at line " + std::to_string(line));
    seen[*i] = true;
    groups[*k].push_back(*i);
  }
  Partition part;
  const std::size_t clients = groups.empty() ? 0 : groups.rbegin()->first + 1;
  part.clients.resize(clients);
  for (auto& [k, idx] : groups) part.clients[k] = std::move(idx);
  const auto counts = dataset.class_counts();
  part.proportions.assign(dataset.classes, std::vector<double>(clients, 0.0));
  for (std::size_t k = 0; k < clients; ++k)
    for (const auto i : part.clients[k]) part.proportions[dataset.labels[i]][k] += 1.0;
  for (std::size_t j = 0; j < dataset.classes; ++j)
    for (auto& v : part.proportions[j]) v = counts[j] ? v / static_cast<double>(counts[j]) : 0.0;
  return part;
}

}  // namespace fmim
