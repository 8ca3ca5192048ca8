#include "cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "n2f/rng.hpp"

#ifndef N2F_VERSION
#define N2F_VERSION "0.0.0"
#endif

namespace n2f::cli {
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string input, output, clean, report, telemetry;
  std::uint64_t seed = 0;
  double lr = 0.001;
  std::string loss = "bce";
  std::string scheme = "checkerboard";
  int patience = 100;
  int avg_window = 100;
  int max_epochs = 20000;
  int threads = 1;
  double sigma = 0.0;
};

struct FileOutcome {
  std::string input;
  std::string output;
  std::string status = "ok";  // ok, skipped or error
  std::string reason;
  Json details = Json::object();
};

// Parsed invocation: the chosen subcommand plus its flags.
struct Invocation {
  const CLI::App* sub = nullptr;
  Options o;
  bool given(const char* flag) const { return sub->count(flag) > 0; }
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::pair<std::uint64_t, std::string> resolve_seed(const Invocation& inv) {
  if (inv.given("--seed")) return {inv.o.seed, "flag"};
  if (const char* env = std::getenv("N2F_SEED"); env && *env) {
    std::uint64_t v = 0;
    const char* end = env + std::char_traits<char>::length(env);
    const auto [ptr, ec] = std::from_chars(env, end, v);
    if (ec != std::errc() || ptr != end) throw UsageError("N2F_SEED must be an unsigned 64-bit integer");
    return {v, "N2F_SEED"};
  }
  return {0, "default"};
}

TrainConfig make_config(const Invocation& inv, std::string& seed_source) {
  TrainConfig c;
  c.loss = parse_loss(inv.o.loss);
  c.scheme = parse_scheme(inv.o.scheme);
  c.lr = inv.o.lr;
  c.patience_epochs = inv.o.patience;
  c.avg_window = inv.o.avg_window;
  c.max_epochs = inv.o.max_epochs;
  std::tie(c.seed, seed_source) = resolve_seed(inv);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

Json config_json(const TrainConfig& c, const std::string& seed_source, bool with_scheme = true) {
  Json j;
  j["loss"] = to_string(c.loss);
  if (with_scheme) j["scheme"] = to_string(c.scheme);
  j["lr"] = c.lr;
  j["patience"] = c.patience_epochs;
  j["avg_window"] = c.avg_window;
  j["max_epochs"] = c.max_epochs;
  j["seed"] = c.seed;
  j["seed_source"] = seed_source;
  return j;
}

// Runs fn(0..n-1) on up to `threads` workers. Each worker limits the kernels
// to one OpenMP thread so that workers do not oversubscribe the machine.
void for_each_job(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const int workers = static_cast<int>(std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, std::max<std::size_t>(n, 1)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      omp_set_num_threads(1);
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

// Threads left for the channels of one file when `files` run side by side.
int channel_threads(int threads, std::size_t files) { return files > 1 ? 1 : threads; }

class Telemetry {
 public:
  explicit Telemetry(const std::string& path) {
    if (path.empty()) return;
    out_.open(path);
    if (!out_) throw UsageError("cannot open telemetry file " + path);
  }

  std::function<void(const EpochRecord&)> hook(const std::string& image, const std::string& scheme = {}) {
    if (!out_.is_open()) return {};
    return [this, image, scheme](const EpochRecord& r) {
      Json j;
      j["image"] = image;
      if (!scheme.empty()) j["scheme"] = scheme;
      j["slice"] = r.slice;
      j["channel"] = r.channel;
      j["epoch"] = r.epoch;
      j["pair_loss"] = r.pair_loss;
      j["val_mse"] = r.val_mse;
      j["seconds"] = r.seconds;
      const std::string line = j.dump();
      std::lock_guard lock(mutex_);
      out_ << line << '\n';
    };
  }

 private:
  std::ofstream out_;
  std::mutex mutex_;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

// Manifests carry no timings, so identical invocations give identical files.
Json manifest(const std::string& command, Json config, Json paths, const std::vector<FileOutcome>& outcomes) {
  Json files = Json::array();
  std::size_t ok = 0, skipped = 0, errors = 0;
  for (const auto& r : outcomes) {
    Json f;
    f["input"] = r.input;
    if (!r.output.empty()) f["output"] = r.output;
    f["status"] = r.status;
    if (!r.reason.empty()) f["reason"] = r.reason;
    for (auto it = r.details.begin(); it != r.details.end(); ++it) f[it.key()] = it.value();
    files.push_back(std::move(f));
    (r.status == "ok" ? ok : r.status == "skipped" ? skipped : errors)++;
  }
  Json m;
  m["tool"] = "n2f";
  m["version"] = N2F_VERSION;
  m["command"] = command;
  m["config"] = std::move(config);
  m["paths"] = std::move(paths);
  m["counts"] = {{"discovered", outcomes.size()}, {"ok", ok}, {"skipped", skipped}, {"error", errors}};
  m["files"] = std::move(files);
  return m;
}

int exit_code(const std::vector<FileOutcome>& outcomes) {
  for (const auto& r : outcomes)
    if (r.status == "error") return kExitPartial;
  return kExitOk;
}

std::string counts_line(const std::vector<FileOutcome>& outcomes) {
  std::size_t ok = 0, skipped = 0, errors = 0;
  for (const auto& r : outcomes) (r.status == "ok" ? ok : r.status == "skipped" ? skipped : errors)++;
  std::ostringstream s;
  s << ok << " ok, " << skipped << " skipped, " << errors << " failed";
  return s.str();
}

void report_errors(const std::vector<FileOutcome>& outcomes, std::ostream& err) {
  for (const auto& r : outcomes)
    if (r.status == "error") err << "n2f: " << r.input << ": " << r.reason << '\n';
}

fs::path require_input(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string(flag) + " is required");
  if (!fs::exists(path)) throw UsageError(std::string(flag) + ": no such file or directory: " + path);
  return path;
}

// ---------------------------------------------------------------- denoise

int cmd_denoise(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const Options& o = inv.o;
  const fs::path input = require_input(o.input, "--input");
  const bool dir_mode = fs::is_directory(input);
  fs::path output = o.output;
  if (dir_mode && fs::exists(output) && !fs::is_directory(output))
    throw UsageError("--output must be a directory when --input is one");
  std::string seed_source;
  const TrainConfig config = make_config(inv, seed_source);
  std::optional<fs::path> clean;
  if (inv.given("--clean")) {
    clean = require_input(o.clean, "--clean");
    if (dir_mode != fs::is_directory(*clean)) throw UsageError("--clean must be a directory exactly when --input is");
  }
  if (config.scheme == Scheme::exact && !clean) throw UsageError("--scheme exact needs --clean");

  const auto files = discover(input);
  if (dir_mode) {
    fs::create_directories(output);
  } else if (fs::is_directory(output)) {
    output /= input.filename();
  } else if (!is_image_path(output)) {
    throw UsageError("--output must end in .png, .tif or .tiff");
  }
  Telemetry telemetry(o.telemetry);

  std::vector<FileOutcome> outcomes(files.size());
  const int inner = channel_threads(o.threads, files.size());
  for_each_job(files.size(), o.threads, [&](std::size_t i) {
    const fs::path& file = files[i];
    FileOutcome& r = outcomes[i];
    r.input = file.filename().string();
    if (!is_image_path(file)) {
      r.status = "skipped";
      r.reason = "not a PNG or TIFF file";
      return;
    }
    try {
      const ImageData image = load_image(file);
      std::optional<ImageData> reference;
      if (clean) reference = load_image(dir_mode ? *clean / file.filename() : *clean);
      TrainConfig local = config;
      local.on_epoch = telemetry.hook(r.input);
      std::vector<ImageRun> runs;
      const ImageData denoised = denoise_image(image, local, inner, reference ? &*reference : nullptr, &runs);
      const fs::path dest = dir_mode ? output / file.filename() : output;
      save_image(denoised, dest);
      r.output = dest.filename().string();
      r.details["width"] = image.width;
      r.details["height"] = image.height;
      r.details["channels"] = image.channels;
      r.details["slices"] = image.slices;
      Json jr = Json::array();
      for (const auto& run : runs)
        jr.push_back({{"slice", run.slice},
                      {"channel", run.channel},
                      {"epochs", run.result.epochs_run},
                      {"stop_reason", to_string(run.result.stop_reason)}});
      r.details["runs"] = std::move(jr);
    } catch (const std::exception& e) {
      r.status = "error";
      r.reason = e.what();
    }
  });

  const fs::path manifest_path =
      !o.report.empty() ? fs::path(o.report) : dir_mode ? output / "manifest.json" : fs::path(output.string() + ".json");
  Json paths{{"input", o.input}, {"output", o.output}};
  if (clean) paths["clean"] = o.clean;
  Json cfg = config_json(config, seed_source);
  cfg["threads"] = o.threads;
  write_text(manifest_path, manifest("denoise", std::move(cfg), std::move(paths), outcomes).dump(2) + "\n");
  report_errors(outcomes, err);
  out << "denoise: " << counts_line(outcomes) << "; manifest " << manifest_path.string() << '\n';
  return exit_code(outcomes);
}

// -------------------------------------------------------------- add-noise

int cmd_add_noise(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const Options& o = inv.o;
  const fs::path input = require_input(o.input, "--input");
  const bool dir_mode = fs::is_directory(input);
  fs::path output = o.output;
  if (dir_mode && fs::exists(output) && !fs::is_directory(output))
    throw UsageError("--output must be a directory when --input is one");
  if (!dir_mode && !fs::is_directory(output)) {
    const std::string ext = lower(output.extension().string());
    if (ext != ".tif" && ext != ".tiff") throw UsageError("add-noise writes float TIFF; --output must end in .tif or .tiff");
  }
  const auto [seed, seed_source] = resolve_seed(inv);

  const auto files = discover(input);
  if (dir_mode) fs::create_directories(output);
  std::map<std::string, int> stems;
  for (const auto& f : files)
    if (is_image_path(f)) ++stems[f.stem().string()];

  std::vector<FileOutcome> outcomes(files.size());
  for_each_job(files.size(), o.threads, [&](std::size_t i) {
    const fs::path& file = files[i];
    FileOutcome& r = outcomes[i];
    r.input = file.filename().string();
    if (!is_image_path(file)) {
      r.status = "skipped";
      r.reason = "not a PNG or TIFF file";
      return;
    }
    try {
      const std::string stem = file.stem().string();
      if (stems[stem] > 1) throw std::runtime_error("another input has the same name stem; outputs would collide");
      const ImageData clean = load_image(file);
      const std::uint64_t s = noise_seed(seed, stem);
      const ImageData noisy = add_gaussian_noise(clean, o.sigma, s);
      const fs::path dest = dir_mode ? output / (stem + ".tif")
                            : fs::is_directory(output) ? output / (stem + ".tif")
                                                       : output;
      save_image(noisy, dest);
      r.output = dest.filename().string();
      r.details["noise_seed"] = s;
      r.details["data_range"] = noisy.data_range;
    } catch (const std::exception& e) {
      r.status = "error";
      r.reason = e.what();
    }
  });

  const fs::path manifest_path = !o.report.empty() ? fs::path(o.report)
                                 : dir_mode        ? output / "manifest.json"
                                 : fs::is_directory(output)
                                     ? output / "manifest.json"
                                     : fs::path(output.string() + ".json");
  Json cfg{{"sigma", o.sigma}, {"seed", seed}, {"seed_source", seed_source}};
  write_text(manifest_path, manifest("add-noise", std::move(cfg), {{"input", o.input}, {"output", o.output}}, outcomes).dump(2) + "\n");
  report_errors(outcomes, err);
  out << "add-noise: " << counts_line(outcomes) << "; manifest " << manifest_path.string() << '\n';
  return exit_code(outcomes);
}

// ----------------------------------------------------- benchmark / ablate

std::string metric(double v, int digits = 10) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct Pair {
  fs::path clean;
  std::optional<fs::path> noisy;  // empty: synthesize with --sigma
};

// Clean images matched with noisy files by name stem, or on their own when
// the noise is synthesized. Unmatched clean images become skipped outcomes.
std::vector<Pair> pair_inputs(const Invocation& inv, std::vector<FileOutcome>& outcomes,
                              std::vector<std::string>& unpaired) {
  const Options& o = inv.o;
  const fs::path clean_root = require_input(o.clean, "--clean");
  const bool synth = inv.given("--sigma");
  if (synth == inv.given("--input")) throw UsageError("give exactly one of --input (noisy files) or --sigma");
  std::map<std::string, fs::path> noisy_by_stem;
  std::set<std::string> used;
  if (!synth) {
    const fs::path noisy_root = require_input(o.input, "--input");
    if (fs::is_directory(noisy_root) != fs::is_directory(clean_root))
      throw UsageError("--input and --clean must both be files or both be directories");
    if (!fs::is_directory(noisy_root)) {
      noisy_by_stem[clean_root.stem().string()] = noisy_root;
    } else {
      for (const auto& f : discover(noisy_root))
        if (is_image_path(f)) noisy_by_stem[f.stem().string()] = f;
    }
  }
  std::vector<Pair> pairs;
  for (const auto& f : discover(clean_root)) {
    FileOutcome r;
    r.input = f.filename().string();
    if (!is_image_path(f)) {
      r.status = "skipped";
      r.reason = "not a PNG or TIFF file";
    } else if (!synth && !noisy_by_stem.count(f.stem().string())) {
      r.status = "skipped";
      r.reason = "no noisy file with a matching name";
    }
    if (r.status == "ok") {
      Pair p{f, std::nullopt};
      if (!synth) {
        p.noisy = noisy_by_stem[f.stem().string()];
        used.insert(f.stem().string());
      }
      pairs.push_back(p);
    }
    outcomes.push_back(std::move(r));
  }
  for (const auto& [stem, path] : noisy_by_stem)
    if (!used.count(stem)) unpaired.push_back(path.filename().string());
  return pairs;
}

ImageData noisy_for(const Pair& p, const ImageData& clean, double sigma, std::uint64_t seed) {
  if (p.noisy) return load_image(*p.noisy);
  return add_gaussian_noise(clean, sigma, noise_seed(seed, p.clean.stem().string()));
}

// Outcomes are indexed like discover(clean); pairs skip the skipped ones.
std::vector<std::size_t> pair_slots(const std::vector<FileOutcome>& outcomes) {
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < outcomes.size(); ++i)
    if (outcomes[i].status == "ok") slots.push_back(i);
  return slots;
}

void emit_csv(const std::string& csv, const std::string& report, std::ostream& out) {
  if (report.empty())
    out << csv;
  else
    write_text(report, csv);
}

fs::path manifest_beside(const std::string& report) {
  fs::path p = report;
  if (lower(p.extension().string()) == ".json") return fs::path(report + ".manifest.json");
  return p.replace_extension(".json");
}

int cmd_benchmark(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const Options& o = inv.o;
  std::string seed_source;
  const TrainConfig config = make_config(inv, seed_source);
  std::vector<FileOutcome> outcomes;
  std::vector<std::string> unpaired;
  const auto pairs = pair_inputs(inv, outcomes, unpaired);
  const auto slots = pair_slots(outcomes);
  if (!o.output.empty()) fs::create_directories(o.output);
  Telemetry telemetry(o.telemetry);

  std::vector<std::optional<ImageScores>> scores(pairs.size());
  const int inner = channel_threads(o.threads, pairs.size());
  for_each_job(pairs.size(), o.threads, [&](std::size_t i) {
    FileOutcome& r = outcomes[slots[i]];
    try {
      const ImageData clean = load_image(pairs[i].clean);
      const ImageData noisy = noisy_for(pairs[i], clean, o.sigma, config.seed);
      TrainConfig local = config;
      local.on_epoch = telemetry.hook(r.input);
      ImageScores s = evaluate(clean, noisy, local, inner);
      if (!o.output.empty()) {
        const fs::path dest = fs::path(o.output) / (pairs[i].clean.stem().string() + ".tif");
        save_image(s.denoised, dest);
        r.output = dest.filename().string();
      }
      r.details["data_range"] = metric_range(clean);
      if (!pairs[i].noisy) r.details["noise_seed"] = noise_seed(config.seed, pairs[i].clean.stem().string());
      else r.details["noisy"] = pairs[i].noisy->filename().string();
      s.denoised = ImageData();
      scores[i] = std::move(s);
    } catch (const std::exception& e) {
      r.status = "error";
      r.reason = e.what();
    }
  });

  std::ostringstream csv;
  csv << "image,psnr_noisy,psnr_denoised,ssim_noisy,ssim_denoised,epochs,seconds\n";
  double sums[6] = {};
  int rows = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!scores[i]) continue;
    const ImageScores& s = *scores[i];
    const double v[6] = {s.psnr_noisy, s.psnr_denoised, s.ssim_noisy, s.ssim_denoised, s.epochs, s.seconds};
    for (int k = 0; k < 6; ++k) sums[k] += v[k];
    ++rows;
    csv << outcomes[slots[i]].input << ',' << metric(v[0]) << ',' << metric(v[1]) << ',' << metric(v[2]) << ','
        << metric(v[3]) << ',' << number(v[4]) << ',' << metric(v[5], 3) << '\n';
  }
  if (rows > 0) {
    for (double& s : sums) s /= rows;
    csv << "mean," << metric(sums[0]) << ',' << metric(sums[1]) << ',' << metric(sums[2]) << ',' << metric(sums[3])
        << ',' << number(sums[4]) << ',' << metric(sums[5], 3) << '\n';
  }
  emit_csv(csv.str(), o.report, out);

  if (!o.report.empty()) {
    Json cfg = config_json(config, seed_source);
    if (inv.given("--sigma")) cfg["sigma"] = o.sigma;
    cfg["threads"] = o.threads;
    Json paths{{"clean", o.clean}};
    if (inv.given("--input")) paths["input"] = o.input;
    if (!o.output.empty()) paths["output"] = o.output;
    paths["report"] = o.report;
    Json m = manifest("benchmark", std::move(cfg), std::move(paths), outcomes);
    m["unpaired_noisy"] = unpaired;
    write_text(manifest_beside(o.report), m.dump(2) + "\n");
  }
  for (const auto& name : unpaired) err << "n2f: " << name << ": no clean image with a matching name, skipped\n";
  report_errors(outcomes, err);
  std::ostream& summary = o.report.empty() ? err : out;
  summary << "benchmark: " << counts_line(outcomes);
  if (rows > 0)
    summary << "; mean PSNR " << metric(sums[0], 2) << " -> " << metric(sums[1], 2) << " dB, SSIM " << metric(sums[2], 4)
            << " -> " << metric(sums[3], 4) << ", " << metric(sums[5], 1) << " s/image";
  summary << '\n';
  return exit_code(outcomes);
}

int cmd_ablate(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const Options& o = inv.o;
  std::string seed_source;
  TrainConfig config = make_config(inv, seed_source);
  std::vector<FileOutcome> outcomes;
  std::vector<std::string> unpaired;
  const auto pairs = pair_inputs(inv, outcomes, unpaired);
  const auto slots = pair_slots(outcomes);
  Telemetry telemetry(o.telemetry);
  constexpr Scheme kSchemes[3] = {Scheme::checkerboard, Scheme::quad, Scheme::exact};

  // One job per (image, scheme); every scheme sees the same noisy realization and seed.
  std::vector<std::optional<ImageScores>> scores(pairs.size() * 3);
  std::vector<std::string> failures(pairs.size() * 3);
  const int inner = channel_threads(o.threads, scores.size());
  for_each_job(scores.size(), o.threads, [&](std::size_t job) {
    const std::size_t i = job / 3;
    try {
      const ImageData clean = load_image(pairs[i].clean);
      const ImageData noisy = noisy_for(pairs[i], clean, o.sigma, config.seed);
      TrainConfig local = config;
      local.scheme = kSchemes[job % 3];
      local.on_epoch = telemetry.hook(outcomes[slots[i]].input, to_string(local.scheme));
      ImageScores s = evaluate(clean, noisy, local, inner);
      s.denoised = ImageData();
      scores[job] = std::move(s);
    } catch (const std::exception& e) {
      failures[job] = to_string(kSchemes[job % 3]) + ": " + e.what();
    }
  });

  std::ostringstream csv;
  csv << "image,psnr_noisy,psnr_normal,psnr_quad,psnr_exact,ssim_noisy,ssim_normal,ssim_quad,ssim_exact,"
         "epochs_normal,epochs_quad,epochs_exact\n";
  double sums[11] = {};
  int rows = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    FileOutcome& r = outcomes[slots[i]];
    std::string why;
    for (int s = 0; s < 3; ++s)
      if (!failures[i * 3 + s].empty()) why += (why.empty() ? "" : "; ") + failures[i * 3 + s];
    if (!why.empty()) {
      r.status = "error";
      r.reason = why;
      continue;
    }
    const ImageScores& n = *scores[i * 3];
    const ImageScores& q = *scores[i * 3 + 1];
    const ImageScores& x = *scores[i * 3 + 2];
    const double v[11] = {n.psnr_noisy,  n.psnr_denoised, q.psnr_denoised, x.psnr_denoised,
                          n.ssim_noisy,  n.ssim_denoised, q.ssim_denoised, x.ssim_denoised,
                          n.epochs,      q.epochs,        x.epochs};
    csv << r.input;
    for (int k = 0; k < 11; ++k) {
      sums[k] += v[k];
      csv << ',' << (k < 8 ? metric(v[k]) : number(v[k]));
    }
    csv << '\n';
    ++rows;
    if (!pairs[i].noisy) r.details["noise_seed"] = noise_seed(config.seed, pairs[i].clean.stem().string());
  }
  if (rows > 0) {
    csv << "mean";
    for (int k = 0; k < 11; ++k) csv << ',' << (k < 8 ? metric(sums[k] / rows) : number(sums[k] / rows));
    csv << '\n';
  }
  emit_csv(csv.str(), o.report, out);

  if (!o.report.empty()) {
    Json cfg = config_json(config, seed_source, false);
    if (inv.given("--sigma")) cfg["sigma"] = o.sigma;
    cfg["schemes"] = {"checkerboard", "quad", "exact"};
    cfg["threads"] = o.threads;
    Json paths{{"clean", o.clean}};
    if (inv.given("--input")) paths["input"] = o.input;
    paths["report"] = o.report;
    Json m = manifest("ablate", std::move(cfg), std::move(paths), outcomes);
    m["unpaired_noisy"] = unpaired;
    write_text(manifest_beside(o.report), m.dump(2) + "\n");
  }
  report_errors(outcomes, err);
  std::ostream& summary = o.report.empty() ? err : out;
  summary << "ablate: " << counts_line(outcomes);
  if (rows > 0)
    summary << "; mean PSNR noisy " << metric(sums[0] / rows, 2) << ", Normal " << metric(sums[1] / rows, 2)
            << ", Quad " << metric(sums[2] / rows, 2) << ", Exact " << metric(sums[3] / rows, 2) << " dB";
  summary << '\n';
  return exit_code(outcomes);
}

// ------------------------------------------------------------ flag setup

void add_training_flags(CLI::App* sub, Options& o, bool with_scheme) {
  sub->add_option("--seed", o.seed, "Seed for initialization and noise (falls back to $N2F_SEED, then 0)");
  sub->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--loss", o.loss, "Training loss")->check(CLI::IsMember({"bce", "mse"}))->capture_default_str();
  if (with_scheme)
    sub->add_option("--scheme", o.scheme, "Downsampling scheme")
        ->check(CLI::IsMember({"checkerboard", "quad", "exact"}))
        ->capture_default_str();
  sub->add_option("--patience", o.patience, "Epochs without improvement before stopping")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--avg-window", o.avg_window, "Validation outputs averaged into the result")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--max-epochs", o.max_epochs, "Hard cap on epochs per run")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--threads", o.threads, "Images/channels trained concurrently")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--telemetry", o.telemetry, "Write per-epoch JSON lines to this file");
}

}  // namespace

std::uint64_t noise_seed(std::uint64_t seed, const std::string& stem) {
  return derive_seed(seed, fnv1a(stem), 0x6e6f697365ULL);
}

double metric_range(const ImageData& clean) {
  if (clean.data_range > 0.0) return clean.data_range;
  if (clean.samples.empty()) return 1.0;
  const auto [lo, hi] = std::minmax_element(clean.samples.begin(), clean.samples.end());
  const double range = static_cast<double>(*hi) - *lo;
  return range > 0.0 ? range : 1.0;
}

ImageScores evaluate(const ImageData& clean, const ImageData& noisy, const TrainConfig& config, int threads) {
  if (!clean.same_layout(noisy)) throw ImageError("clean and noisy images differ in size or layout");
  ImageScores s;
  const double range = metric_range(clean);
  const auto start = std::chrono::steady_clock::now();
  std::vector<ImageRun> runs;
  s.denoised = denoise_image(noisy, config, threads, &clean, &runs);
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& r : runs) s.epochs += r.result.epochs_run;
  if (!runs.empty()) s.epochs /= static_cast<double>(runs.size());
  s.psnr_noisy = psnr(noisy, clean, range);
  s.psnr_denoised = psnr(s.denoised, clean, range);
  s.ssim_noisy = ssim(noisy, clean, range);
  s.ssim_denoised = ssim(s.denoised, clean, range);
  return s;
}

bool is_image_path(const fs::path& path) {
  const std::string ext = lower(path.extension().string());
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

std::vector<fs::path> discover(const fs::path& input) {
  if (!fs::is_directory(input)) return {input};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noise2Fast: single-image self-supervised denoising", "n2f"};
  app.require_subcommand(1);
  app.set_version_flag("--version", N2F_VERSION);
  Options o;

  auto* denoise = app.add_subcommand("denoise", "Denoise an image, or every image in a directory");
  denoise->add_option("--input", o.input, "Noisy image or directory")->required();
  denoise->add_option("--output", o.output, "Output image or directory")->required();
  denoise->add_option("--clean", o.clean, "Clean reference (needed by --scheme exact)");
  denoise->add_option("--report", o.report, "Manifest path (default: next to the output)");
  add_training_flags(denoise, o, true);

  auto* noise = app.add_subcommand("add-noise", "Add Gaussian noise; writes unclipped float TIFF");
  noise->add_option("--input", o.input, "Clean image or directory")->required();
  noise->add_option("--output", o.output, "Output .tif or directory")->required();
  noise->add_option("--sigma", o.sigma, "Noise standard deviation on the image's value scale")
      ->required()
      ->check(CLI::NonNegativeNumber);
  noise->add_option("--seed", o.seed, "Noise seed (falls back to $N2F_SEED, then 0)");
  noise->add_option("--report", o.report, "Manifest path (default: next to the output)");
  noise->add_option("--threads", o.threads, "Files processed concurrently")->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("benchmark", "Denoise clean/noisy pairs and report PSNR, SSIM and time");
  bench->add_option("--clean", o.clean, "Clean image or directory")->required();
  bench->add_option("--input", o.input, "Noisy image or directory (names matched by stem)");
  bench->add_option("--sigma", o.sigma, "Synthesize noise instead of reading --input")->check(CLI::NonNegativeNumber);
  bench->add_option("--output", o.output, "Directory for the denoised images");
  bench->add_option("--report", o.report, "CSV path (default: stdout); the manifest goes beside it");
  add_training_flags(bench, o, true);

  auto* ablate = app.add_subcommand("ablate", "Compare the checkerboard, quad and exact schemes");
  ablate->add_option("--clean", o.clean, "Clean image or directory")->required();
  ablate->add_option("--input", o.input, "Noisy image or directory (names matched by stem)");
  ablate->add_option("--sigma", o.sigma, "Synthesize noise instead of reading --input")->check(CLI::NonNegativeNumber);
  ablate->add_option("--report", o.report, "CSV path (default: stdout); the manifest goes beside it");
  add_training_flags(ablate, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Invocation inv{app.get_subcommands().front(), o};
  const std::string name = inv.sub->get_name();
  try {
    if (name == "denoise") return cmd_denoise(inv, out, err);
    if (name == "add-noise") return cmd_add_noise(inv, out, err);
    if (name == "benchmark") return cmd_benchmark(inv, out, err);
    return cmd_ablate(inv, out, err);
  } catch (const UsageError& e) {
    err << "n2f " << name << ": " << e.what() << "\n\n" << inv.sub->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "n2f " << name << ": " << e.what() << '\n';
    return kExitPartial;
  }
}

}  // namespace n2f::cli
