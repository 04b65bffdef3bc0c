// Acceptance harness. `acceptance N` checks criterion N (1-9) and prints
//   criterion N: PASS|FAIL  <summary>
// followed by indented detail lines. With no argument all criteria run.
// Exit status is 0 only when every requested criterion passes.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "alq/alq.hpp"
#include "oracles.hpp"

using namespace alq;

namespace {

struct Outcome {
  bool pass = true;
  std::string summary;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    pass = pass && ok;
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared desk-scale fixture for criteria 6, 7 and 9.

struct DeskData {
  Dataset train, test;
};

DeskData desk_data() {
  const auto all = normalize(synth_generate(40, 1, 0.0));
  auto [tr, te] = split(all, {0.8, 1, true});
  return {std::move(tr), std::move(te)};
}

TrainConfig desk_train_config() {
  TrainConfig c;
  c.epochs = 10;
  c.batch_size = 4;
  c.learning_rate = 1e-3;
  c.seed = 7;
  return c;
}

AlqConfig desk_alq_config() {
  AlqConfig c;
  c.group_size = 16;
  c.i_max_default = 4;
  c.prune = PruneTarget::bitwidth(2.0);
  c.scorer = Scorer::loss_aware;
  c.refine_iters = 3;
  c.calib_batch = 64;
  c.seed = 7;
  return c;
}

Network desk_train(const DeskData& d) {
  return train(init_network(default_ecgnet_spec(), desk_train_config().seed), d.train, desk_train_config()).network;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  const auto spec = default_ecgnet_spec();
  const auto counts = param_count(spec);
  const std::vector<std::size_t> table{136, 1164, 3488, 14400, 20544, 12352, 13896, 13888, 1105};
  bool all = counts.layers.size() == table.size();
  for (std::size_t i = 0; all && i < table.size(); ++i) {
    const bool ok = counts.layers[i].count == table[i];
    o.check(ok, fmt("%-9s params %zu (expected %zu)", counts.layers[i].name.c_str(), counts.layers[i].count, table[i]));
  }
  o.check(all, "nine parameterized layers");
  o.check(counts.total == 80973, fmt("total params %zu (expected 80973)", counts.total));
  const auto shapes = spec.shapes();
  const auto flat = shapes[spec.layer_by_name("Flatten") + 1].size();
  o.check(flat == 216, fmt("flatten width %zu (expected 216)", flat));
  o.summary = fmt("param counts and flatten width (total %zu, flatten %zu)", counts.total, flat);
  return o;
}

Outcome criterion2() {
  Outcome o;
  const std::vector<double> bw{1.2500, 1.9896, 1.7005, 1.7095, 1.4133, 0.8545, 0.8550, 1.7422, 2.0000};
  const std::vector<std::size_t> table_bits{170, 2316, 5921, 24617, 29035, 10555, 11881, 24196, 2210};
  const auto rep = memory_report_from_bitwidths(default_ecgnet_spec(), bw);
  for (std::size_t i = 0; i < bw.size(); ++i) {
    const auto diff = static_cast<long long>(rep.rows[i].base_bits) - static_cast<long long>(table_bits[i]);
    o.check(std::llabs(diff) <= 1, fmt("%-9s %zu x %.4f -> %zu bits (table %zu, %+lld)", rep.rows[i].name.c_str(),
                                       rep.rows[i].params, bw[i], rep.rows[i].base_bits, table_bits[i], diff));
  }
  o.check(rep.total_base_bits == 110901, fmt("total %zu bits (expected 110901)", rep.total_base_bits));
  const double kb = std::round(rep.kilobytes * 1000.0) / 1000.0;
  o.check(kb == 13.538, fmt("%.3f KB (expected 13.538)", kb));
  o.check(std::abs(rep.compression_rate - 23.36) <= 0.01, fmt("compression %.4fx (expected 23.36 +- 0.01)", rep.compression_rate));

  // Supplementary: the published Memory column itself sums to the total.
  std::size_t column = 0;
  for (auto b : table_bits) column += b;
  const double column_kb = static_cast<double>(column) / 8.0 / 1024.0;
  o.details.push_back(fmt("info sum of the published Memory column = %zu bits = %.3f KB, %.4fx", column, column_kb,
                          32.0 * 80973.0 / static_cast<double>(column)));
  o.summary = fmt("injected bitwidths -> %zu bits = %.3f KB, %.2fx", rep.total_base_bits, rep.kilobytes,
                  rep.compression_rate);
  return o;
}

Outcome criterion3() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240101);
  auto size = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  auto vec = [&](std::size_t n) {
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (auto& x : v) x = nd(rng);
    return v;
  };

  // (a) bases step against exhaustive sign matrices
  int bad_a = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = size(1, 6), I = size(1, 2);
    const auto w = vec(n);
    std::vector<double> alpha(I);
    for (auto& a : alpha) a = std::uniform_real_distribution<double>(0.05, 1.5)(rng);
    std::sort(alpha.begin(), alpha.end(), std::greater<>());
    QuantGroup q{static_cast<std::uint32_t>(n), alpha, std::vector<std::uint8_t>(I * QuantGroup::column_bytes(static_cast<std::uint32_t>(n)), 0)};
    const auto got = optimize_bases(w, q);
    bad_a += oracle::sq_error(w, got.reconstruct()) != oracle::best_error_fixed_alpha(w, alpha);
  }
  o.check(bad_a == 0, fmt("(a) optimize_bases exact on 1000 groups (n<=6, I<=2): %d mismatches", bad_a));

  // (b) coordinates against an SVD pseudo-inverse
  double worst_b = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = size(1, 16), I = size(1, 4);
    const auto w = vec(n);
    QuantGroup q;
    q.size = static_cast<std::uint32_t>(n);
    for (std::size_t i = 0; i < I; ++i) {
      std::vector<int> col(n);
      for (auto& s : col) s = std::bernoulli_distribution(0.5)(rng) ? 1 : -1;
      q.push_column(1.0, col);
    }
    const auto expect = oracle::dense_reconstruct(q, oracle::pinv_coords(w, q));
    const auto got = optimize_coords(w, q).reconstruct();
    for (std::size_t j = 0; j < n; ++j) worst_b = std::max(worst_b, std::abs(got[j] - expect[j]));
  }
  o.check(worst_b <= 1e-8, fmt("(b) optimize_coords vs pseudo-inverse on 1000 groups: max deviation %.3g", worst_b));

  // (c) alternating refinement is monotone
  int bad_c = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = size(1, 16), I = size(1, 4);
    const auto w = vec(n);
    auto q = init_decompose(w, I);
    double prev = reconstruction_error(w, q);
    for (int it = 0; it < 4; ++it) {
      q = optimize_coords(w, optimize_bases(w, q));
      const double e = reconstruction_error(w, q);
      bad_c += e > prev * (1 + 1e-12) + 1e-15;
      prev = e;
    }
  }
  o.check(bad_c == 0, fmt("(c) refinement never increased error over 1000 groups x 4 rounds: %d increases", bad_c));

  // (d) loss-aware bottom-1 against exhaustive removal on a 35-parameter net
  NetworkSpec s;
  s.input_length = 8;
  s.class_count = 3;
  s.layers = {{LayerKind::conv1d, 3, 2, 1, 1, Activation::relu, 0.0f, "Conv1D_1"},
              {LayerKind::maxpool1d, 2, 0, 2, 0, Activation::none, 0.0f, "MaxPooling1D_1"},
              {LayerKind::flatten, 1, 0, 1, 0, Activation::none, 0.0f, "Flatten"},
              {LayerKind::softmax_dense, 1, 3, 1, 0, Activation::none, 0.0f, "Softmax"}};
  const auto toy_calib = [&](std::uint64_t seed) {
    Dataset calib;
    calib.class_count = 3;
    std::mt19937_64 drng(seed);
    std::normal_distribution<float> nd;
    for (int i = 0; i < 12; ++i) {
      EcgRecord r{std::vector<float>(8), static_cast<int>(drng() % 3)};
      for (auto& v : r.samples) v = nd(drng);
      calib.records.push_back(r);
    }
    return calib;
  };
  struct Pick {
    CoordRef scored, removal;
    std::size_t candidates;
  };
  const auto bottom_one = [&](std::uint64_t init_seed, std::uint64_t calib_seed) {
    const auto calib = toy_calib(calib_seed);
    const auto net = init_network(s, init_seed);
    const auto layers = initialize_layers(net, 4, [](const std::string&) { return 2; });
    auto scores = score_coordinates(layers, net, calib.records, Scorer::loss_aware);
    std::sort(scores.begin(), scores.end(), less_significant);
    const auto pick = oracle::exhaustive_removal(net, layers, calib.records);
    return Pick{scores.front().ref, pick.ref, pick.all.size()};
  };
  const auto p = bottom_one(3, 4);
  o.check(p.scored == p.removal,
          fmt("(d) loss_aware bottom-1 (layer %zu group %zu coord %zu) vs exhaustive removal (layer %zu group %zu coord "
              "%zu) over %zu coordinates, %zu params",
              p.scored.layer, p.scored.group, p.scored.coord, p.removal.layer, p.removal.group, p.removal.coord,
              p.candidates, param_count(s).total));
  int agree = 0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    const auto q = bottom_one(100 + k, 200 + k);
    agree += q.scored == q.removal;
  }
  o.details.push_back(fmt("info (d) bottom-1 agreement over 50 further init/calibration seeds: %d/50", agree));

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.summary = fmt("quantizer oracles (a)-(d) in %.1f s", secs);
  return o;
}

Outcome criterion4() {
  Outcome o;
  // Groups of the form alpha * sign(w) are represented exactly by the greedy init.
  const auto net = oracle::snap_to_one_bit(init_network(default_ecgnet_spec(), 11), 16);
  AlqConfig c;
  c.group_size = 16;
  c.i_max_default = 2;
  c.prune = PruneTarget::none();
  c.refine_iters = 0;
  c.scorer = Scorer::magnitude;
  const auto model = alq_pipeline(net, Dataset{}, c).model;

  const auto deq = dequantize(model);
  double worst_w = 0.0;
  for (auto li : net.spec.parameterized_layers()) {
    const auto a = flatten_params(net, li), b = flatten_params(deq, li);
    for (std::size_t j = 0; j < a.size(); ++j) worst_w = std::max(worst_w, static_cast<double>(std::abs(a[j] - b[j])));
  }
  o.check(worst_w <= 1e-6, fmt("dequantized parameters match originals: max |diff| %.3g", worst_w));

  const auto records = normalize(synth_generate(6, 5, 0.3)).records;  // 102 records
  double worst = 0.0;
  int agree = 0, n = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto q = qforward(model, records[i]), f = forward(net, records[i]);
    for (std::size_t k = 0; k < q.logits.size(); ++k) worst = std::max(worst, std::abs(q.logits[k] - f.logits[k]));
    agree += argmax(q.probs) == argmax(f.probs);
    ++n;
  }
  o.check(worst <= 1e-5, fmt("max |qforward - forward| per logit over %d records: %.3g", n, worst));
  o.check(agree == n, fmt("argmax agreement %d/%d", agree, n));
  o.summary = fmt("lossless regime: max logit diff %.3g, argmax %d/%d", worst, agree, n);
  return o;
}

QuantModel random_model(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> small(1, 4);
  NetworkSpec s;
  s.input_length = 6 + small(rng);
  s.input_channels = small(rng);
  s.class_count = 2 + small(rng);
  s.layers = {{LayerKind::conv1d, small(rng), small(rng), 1, 1, Activation::relu, 0.0f, "Conv1D_1"},
              {LayerKind::flatten, 1, 0, 1, 0, Activation::none, 0.0f, "Flatten"},
              {LayerKind::dense, 1, small(rng), 1, 0, Activation::relu, 0.0f, "Dense"},
              {LayerKind::softmax_dense, 1, s.class_count, 1, 0, Activation::none, 0.0f, "Softmax"}};
  QuantModel m;
  m.spec = s;
  m.group_size = static_cast<std::uint32_t>(std::uniform_int_distribution<int>(1, 16)(rng));
  m.meta = {rng(), sha256_hex(std::to_string(rng()))};
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<float> mag(1e-3f, 4.0f);
  for (auto li : s.parameterized_layers()) {
    QuantLayer l{{}, m.group_size, param_count(s, li), li};
    for (std::size_t off = 0; off < l.param_count; off += m.group_size) {
      const auto n = static_cast<std::uint32_t>(std::min<std::size_t>(m.group_size, l.param_count - off));
      const auto I = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
      QuantGroup q;
      q.size = n;
      for (std::size_t i = 0; i < I; ++i) {
        std::vector<int> col(n);
        for (auto& v : col) v = coin(rng) ? 1 : -1;
        q.push_column(mag(rng), col);
      }
      // merge duplicates/negations, then keep only f32-exact coordinates
      q = canonicalize(std::move(q));
      for (auto& a : q.coords) a = static_cast<float>(a);
      l.groups.push_back(canonicalize(std::move(q)));
    }
    m.layers.push_back(std::move(l));
  }
  return m;
}

Outcome criterion5() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(555);
  int failures = 0, groups = 0, coords = 0;
  const auto dir = std::filesystem::temp_directory_path() / ("alq_accept5_" + std::to_string(rng()));
  std::filesystem::create_directories(dir);
  for (int i = 0; i < 500; ++i) {
    const auto m = random_model(rng);
    const auto path = (dir / "m.alqq").string();
    serialize(m, path);
    const auto back = deserialize(path);
    bool same = back.spec == m.spec && back.group_size == m.group_size && back.meta == m.meta &&
                back.layers.size() == m.layers.size();
    for (std::size_t li = 0; same && li < m.layers.size(); ++li) {
      const auto &a = m.layers[li], &b = back.layers[li];
      same = a.groups.size() == b.groups.size();
      for (std::size_t g = 0; same && g < a.groups.size(); ++g) {
        const auto &x = a.groups[g], &y = b.groups[g];
        same = x.size == y.size && x.coords.size() == y.coords.size() && x.bits == y.bits;
        for (std::size_t k = 0; same && k < x.coords.size(); ++k) {
          const float fx = static_cast<float>(x.coords[k]), fy = static_cast<float>(y.coords[k]);
          same = std::memcmp(&fx, &fy, sizeof(float)) == 0 && x.coords[k] == y.coords[k];
        }
        for (std::size_t k = 0; same && k < x.coords.size(); ++k)
          for (std::size_t j = 0; same && j < x.size; ++j) same = x.sign(k, j) == y.sign(k, j);
        ++groups;
        coords += static_cast<int>(x.coords.size());
      }
    }
    same = same && encode_quant_model(back) == io::read_file(path);
    failures += !same;
  }
  std::filesystem::remove_all(dir);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.check(failures == 0, fmt("500 random models, %d groups, %d coordinates: %d mismatches", groups, coords, failures));
  o.summary = fmt("serialize/deserialize identity on 500 random models in %.1f s", secs);
  return o;
}

Outcome criterion6() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const auto data = desk_data();
  const auto net = desk_train(data);
  const auto fp = evaluate(net, data.test);
  o.check(fp.metrics.oa >= 95.0, fmt("full-precision test OA %.2f%% (>= 95) on %zu held-out records, %zu train",
                                     fp.metrics.oa, data.test.size(), data.train.size()));
  const auto cfg = desk_alq_config();
  const auto res = alq_pipeline(net, data.train, cfg);
  const double bw = network_average_bitwidth(res.model.layers);
  o.check(bw <= 2.0, fmt("weight-weighted average bitwidth %.4f (<= 2.0) from %.4f initial", bw,
                         res.report.avg_bitwidth_initial));
  const auto q = evaluate(res.model, data.test);
  const double drop = fp.metrics.oa - q.metrics.oa;
  o.check(drop <= 5.0, fmt("quantized OA %.2f%%, drop %.2f pp (<= 5)", q.metrics.oa, drop));
  const auto mem = memory_report(res.model);
  o.check(mem.compression_rate >= 15.0, fmt("compression %.2fx on base bits (%zu bits = %.3f KB) (>= 15)",
                                           mem.compression_rate, mem.total_base_bits, mem.kilobytes));
  for (const auto& r : mem.rows) o.details.push_back(fmt("info %-9s %.4f bits", r.name.c_str(), r.avg_bitwidth));
  o.details.push_back(fmt("info calibration loss: fp %.4f, init %.4f, pruned %.4f, refined %.4f",
                          res.report.calib_loss_full_precision, res.report.calib_loss_init,
                          res.report.calib_loss_pruned, res.report.calib_loss_final));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.summary = fmt("desk-scale: OA %.2f%% -> %.2f%%, Ibar %.3f, %.2fx, %.0f s", fp.metrics.oa, q.metrics.oa, bw,
                  mem.compression_rate, secs);
  return o;
}

Outcome criterion7() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const auto data = desk_data();
  const auto net = desk_train(data);
  const std::vector<double> rates{0.0, 0.25, 0.5, 0.75, 0.95};
  const auto pts = sweep(net, data.train, data.test, rates, desk_alq_config());
  bool decreasing = true;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    o.details.push_back(fmt("info rate %.2f: Ibar %.4f, calib loss %.4f (refined %.4f), test OA %.2f%%",
                            pts[i].prune_rate, pts[i].avg_bitwidth, pts[i].calib_loss, pts[i].calib_loss_refined,
                            pts[i].test_oa));
    if (i > 0) decreasing = decreasing && pts[i].avg_bitwidth < pts[i - 1].avg_bitwidth;
  }
  o.check(decreasing, "average bitwidth strictly decreasing across rates");
  o.check(pts.back().calib_loss > pts.front().calib_loss,
          fmt("pre-refinement calib loss at 0.95 (%.4f) > at 0 (%.4f)", pts.back().calib_loss, pts.front().calib_loss));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.summary = fmt("sweep shape over 5 rates (Ibar %.3f -> %.3f, loss %.4f -> %.4f), %.0f s", pts.front().avg_bitwidth,
                  pts.back().avg_bitwidth, pts.front().calib_loss, pts.back().calib_loss, secs);
  return o;
}

Outcome criterion8() {
  Outcome o;
  ConfusionMatrix cm(2);
  cm.at(0, 0) = 5;
  cm.at(1, 0) = 1;
  cm.at(1, 1) = 4;
  const auto m = metrics(cm);
  o.check(m.oa == 90.0 && m.sen == 90.0 && m.spe == 90.0,
          fmt("2-class [[5,0],[1,4]]: OA %.10g, Sen %.10g, Spe %.10g (expected 90/90/90)", m.oa, m.sen, m.spe));

  std::vector<int> all;
  for (int c = 0; c < 17; ++c)
    for (int r = 0; r <= c % 3; ++r) all.push_back(c);
  const auto perfect = metrics(confusion(all, all));
  o.check(perfect.oa == 100.0 && perfect.sen == 100.0 && perfect.spe == 100.0, "perfect 17-class matrix gives 100/100/100");

  std::mt19937_64 rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int k = std::uniform_int_distribution<int>(2, 17)(rng);
    const int n = std::uniform_int_distribution<int>(1, 300)(rng);
    std::uniform_int_distribution<int> cls(0, k - 1);
    std::vector<int> t(n), p(n);
    for (int i = 0; i < n; ++i) {
      t[i] = cls(rng);
      p[i] = std::bernoulli_distribution(0.7)(rng) ? t[i] : cls(rng);
    }
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> pt(n), pp(n);
    for (int i = 0; i < n; ++i) {
      pt[i] = perm[t[i]];
      pp[i] = perm[p[i]];
    }
    const auto a = metrics(confusion(p, t, k)), b = metrics(confusion(pp, pt, k));
    worst = std::max({worst, std::abs(a.oa - b.oa), std::abs(a.sen - b.sen), std::abs(a.spe - b.spe)});
  }
  o.check(worst <= 1e-9, fmt("label permutation invariance over 500 random matrices: max diff %.3g", worst));
  o.summary = "metrics: hand example, perfect matrix, permutation invariance";
  return o;
}

std::vector<std::uint8_t> concat_reports(const std::string& dir) {
  std::vector<std::uint8_t> all;
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  for (const auto& n : names) {
    const auto bytes = io::read_file((std::filesystem::path(dir) / n).string());
    all.insert(all.end(), n.begin(), n.end());
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return all;
}

Outcome criterion9() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const auto base = std::filesystem::temp_directory_path() / ("alq_accept9_" + std::to_string(std::random_device{}()));
  struct RunOutput {
    std::vector<std::uint8_t> checkpoint, model, reports;
  };
  auto run_once = [&](const std::string& tag) {
    const auto dir = base / tag;
    std::filesystem::create_directories(dir);
    const auto data = desk_data();
    const auto net = desk_train(data);
    save_checkpoint(net, (dir / "m.alqf").string());
    const auto res = alq_pipeline(load_checkpoint((dir / "m.alqf").string()), data.train, desk_alq_config());
    serialize(res.model, (dir / "m.alqq").string());
    ReportBundle b;
    b.evaluation = evaluate(deserialize((dir / "m.alqq").string()), data.test);
    b.memory = memory_report(res.model);
    const std::vector<double> rates{0.0, 0.5};
    b.sweep = sweep(net, data.train, data.test, rates, desk_alq_config());
    emit_reports(b, (dir / "reports").string());
    return RunOutput{io::read_file((dir / "m.alqf").string()), io::read_file((dir / "m.alqq").string()),
                     concat_reports((dir / "reports").string())};
  };
  const auto a = run_once("a");
  // second run with a different worker count
  setenv("ALQ_THREADS", "3", 1);
  const auto b = run_once("b");
  unsetenv("ALQ_THREADS");
  std::filesystem::remove_all(base);
  o.check(a.checkpoint == b.checkpoint, fmt("checkpoints identical (%zu bytes)", a.checkpoint.size()));
  o.check(a.model == b.model, fmt("quantized models identical (%zu bytes)", a.model.size()));
  o.check(a.reports == b.reports, fmt("report files identical (%zu bytes)", a.reports.size()));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.summary = fmt("determinism across two full runs (second with ALQ_THREADS=3), %.0f s", secs);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9};
  std::vector<int> which;
  if (argc > 1) {
    for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  } else {
    for (int i = 1; i <= 9; ++i) which.push_back(i);
  }
  bool all = true;
  for (int n : which) {
    if (n < 1 || n > 9) {
      std::cerr << "usage: acceptance [1-9 ...]\n";
      return 2;
    }
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("threw: ") + e.what();
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.summary << "\n";
    for (const auto& d : o.details) std::cout << "    " << d << "\n";
    std::cout.flush();
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
