#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "ncbundle/io.hpp"

using namespace ncb;
using io::Json;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "text";
  std::string input;
  int level = 3;
  int count = 60;
  int trials = 0;
  int family_size = 0;
};

struct Run {
  Options opt;
  RunConfig cfg;

  io::Problem problem() const {
    if (opt.input.empty()) throw InvalidSpec("this subcommand needs --input <problem.json>");
    return io::load_problem(io::read_json(opt.input));
  }

  const Json& section(const io::Problem& pr, const char* key) const {
    if (!pr.doc.contains(key)) throw InvalidSpec(std::string("problem document has no '") + key + "'");
    return pr.doc.at(key);
  }

  void emit(const std::string& name, const io::Report& rep, const SpacePtr& space = nullptr,
            const std::vector<io::CsvRow>& rows = {}) const {
    std::cout << (opt.format == "structured" ? rep.structured() : rep.text());
    if (opt.out.empty()) return;
    std::filesystem::create_directories(opt.out);
    const std::filesystem::path dir(opt.out);
    io::write_file((dir / (name + ".json")).string(), rep.structured());
    io::write_file((dir / (name + ".txt")).string(), rep.text());
    if (space && !rows.empty()) io::write_file((dir / (name + ".csv")).string(), io::csv(*space, rows));
  }
};

const ProjectionField& need_field(const io::Problem& pr) {
  if (!pr.field) throw InvalidSpec("problem document has no 'field'");
  return *pr.field;
}

ProjectionField frame_projection(const io::Problem& pr, const Frame& f) {
  if (pr.field) return *pr.field;
  if (f.context) return *f.context;
  throw InvalidSpec("no projection to compare the frame against: give a 'field'");
}

std::vector<io::CsvRow> per_vertex_defect(const ProjectionField& p, const Frame& f) {
  const auto op = frame_operator(f);
  std::vector<io::CsvRow> rows;
  for (std::size_t v = 0; v < p.matrices.size(); ++v)
    rows.push_back({static_cast<Vertex>(v), "frame_defect", operator_norm(op.matrices[v] - p.matrices[v])});
  return rows;
}

int cmd_check_frame(const Run& r) {
  const auto pr = r.problem();
  const auto frame = io::frame_from_json(r.section(pr, "frame"), pr);
  const auto p = frame_projection(pr, frame);
  io::Report rep{"check-frame"};
  rep.data["frame_size"] = frame.elements.size();
  rep.data["ambient"] = frame.ambient();
  const double defect = frame_defect(p, frame, r.cfg.tol.in_range);
  rep.data["defect"] = defect;
  rep.data["tolerance"] = r.cfg.tol.frame;
  const bool ok = defect <= r.cfg.tol.frame;
  rep.data["verdict"] = ok ? "frame" : "not a frame";
  r.emit("check-frame", rep, p.space, per_vertex_defect(p, frame));
  return ok ? 0 : 1;
}

double inner_product_error(const Stabilization& st) {
  double err = 0.0;
  const auto& e = st.frame.elements;
  std::vector<Section> ve;
  for (const auto& x : e) ve.push_back(st.apply(x));
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t j = i; j < e.size(); ++j)
      err = std::max(err, sup_norm(inner_product(ve[i], ve[j]) - inner_product(e[i], e[j])));
  return err;
}

int cmd_stabilize(const Run& r) {
  const auto pr = r.problem();
  const auto frame = io::frame_from_json(r.section(pr, "frame"), pr);
  const auto st = stabilize(frame, r.cfg.tol.frame);
  const auto res = residuals(st.p_out);
  io::Report rep{"stabilize"};
  rep.data["frame_size"] = frame.elements.size();
  rep.data["idempotency_defect"] = st.idempotency_defect;
  rep.data["hermitian_defect"] = res.hermitian;
  rep.data["inner_product_error"] = inner_product_error(st);
  std::vector<io::CsvRow> rows;
  for (std::size_t v = 0; v < st.p_out.matrices.size(); ++v)
    rows.push_back({static_cast<Vertex>(v), "trace_p_out", st.p_out.matrices[v].trace().real()});
  r.emit("stabilize", rep, st.p_out.space, rows);
  return 0;
}

int cmd_extend(const Run& r) {
  const auto pr = r.problem();
  if (!pr.compactification) throw InvalidSpec("extend needs a 'compactification'");
  const auto frame = io::frame_from_json(r.section(pr, "frame"), pr);
  const auto out = extend_projection(frame, pr.compactification, r.cfg.tol);
  io::Report rep{"extend"};
  if (const auto* bad = std::get_if<NotExtendable>(&out)) {
    rep.data["extends"] = false;
    rep.data["witness"] = io::to_json(*bad);
    r.emit("extend", rep);
    return 1;
  }
  const auto& res = std::get<ExtensionResult>(out);
  rep.data["extends"] = true;
  rep.data["result"] = io::to_json(res);
  try {
    rep.data["chern"] = io::to_json(chern_number(res.projection));
  } catch (const NotClosedSurface&) {
    rep.data["chern"] = "no closed surface";
  }
  r.emit("extend", rep);
  return res.verdicts.projective_over_unitisation ? 0 : 1;
}

int cmd_equivalence(const Run& r) {
  const auto pr = r.problem();
  const auto mi = io::module_from_json(r.section(pr, "module"), pr);
  EquivalenceOptions opts;
  opts.tol = r.cfg.tol;
  const auto rep_eq = equivalence_report(mi.module, mi.compactification, opts);
  io::Report rep{"equivalence"};
  rep.data["module"] = mi.name;
  rep.data["report"] = io::to_json(rep_eq);
  r.emit("equivalence", rep);
  return rep_eq.condition1 ? 0 : 1;
}

int cmd_watatani(const Run& r) {
  const auto pr = r.problem();
  const auto mi = io::module_from_json(r.section(pr, "module"), pr);
  io::Report rep{"watatani"};
  rep.data["module"] = mi.name;
  const auto cor = cor58_report(mi.module, r.cfg.tol);
  rep.data["conditions"] = io::to_json(cor);
  std::vector<io::CsvRow> rows;
  int code = 1;
  if (cor.finite_index) {
    const auto idx = watatani_index(mi.module, canonical_frame(mi.module, r.cfg.tol.rank_relative), r.cfg.tol);
    rep.data["index"] = io::to_json(idx);
    for (std::size_t v = 0; v < idx.values.size(); ++v)
      rows.push_back({static_cast<Vertex>(v), "index", idx.raw[static_cast<Eigen::Index>(v)]});
    if (r.opt.trials > 0) {
      const int fam = r.opt.family_size > 0 ? r.opt.family_size : kDefaultFamilySize;
      const auto est = numerical_index_estimate(mi.module, r.opt.trials, fam, r.cfg.seed);
      rep.data["estimate"] = {{"lambda", est.lambda}, {"mean", est.mean}, {"trials", est.trials},
                              {"family_size", est.family_size}};
    }
    code = 0;
  }
  r.emit("watatani", rep, mi.space, rows);
  return code;
}

ProjectionField extended_field(const io::Problem& pr, const Tolerances& tol) {
  const auto& p = need_field(pr);
  if (!pr.compactification) return p;
  auto out = extend_field(p, pr.compactification, tol.boundary);
  if (auto* bad = std::get_if<NotExtendable>(&out)) throw *bad;
  return std::get<ProjectionField>(std::move(out));
}

int cmd_chern(const Run& r) {
  const auto pr = r.problem();
  io::Report rep{"chern"};
  ProjectionField p;
  try {
    p = extended_field(pr, r.cfg.tol);
  } catch (const NotExtendable& bad) {
    rep.data["extends"] = false;
    rep.data["witness"] = io::to_json(bad);
    r.emit("chern", rep);
    return 1;
  }
  rep.data["chern"] = io::to_json(chern_number(p));
  r.emit("chern", rep);
  return 0;
}

int cmd_suspend(const Run& r) {
  const auto pr = r.problem();
  const auto& p = need_field(pr);
  const auto frame = io::frame_from_json(r.section(pr, "frame"), pr);
  const auto line = build_space(io::mesh_from_json(r.section(pr, "line")));
  const auto s = suspend(p, frame, line, pr.compactification, r.cfg.tol);
  io::Report rep{"suspend"};
  rep.data["vertices"] = s.space->size();
  rep.data["frame_size"] = s.frame.elements.size();
  rep.data["frame_defect"] = s.frame_defect;
  int code = s.frame_defect <= r.cfg.tol.frame ? 0 : 1;
  if (s.extension) {
    if (const auto* bad = std::get_if<NotExtendable>(&*s.extension)) {
      rep.data["extends"] = false;
      rep.data["witness"] = io::to_json(*bad);
      code = 1;
    } else {
      const auto& res = std::get<ExtensionResult>(*s.extension);
      rep.data["extends"] = res.verdicts.projective_over_unitisation;
      rep.data["snap_residual"] = res.snap_residual;
      rep.data["boundary_vertices"] = res.projection.boundary.size();
      if (!res.verdicts.projective_over_unitisation) code = 1;
    }
  }
  r.emit("suspend", rep);
  return code;
}

int cmd_tensor(const Run& r) {
  const auto pr = r.problem();
  const auto& p = need_field(pr);
  const auto right = io::load_problem(r.section(pr, "right"));
  const auto& q = need_field(right);
  const auto t = external_tensor(p, q, r.cfg.vertex_budget);
  const auto res = residuals(t);
  io::Report rep{"tensor"};
  rep.data["vertices"] = t.space->size();
  rep.data["ambient"] = t.n;
  rep.data["idempotency_defect"] = res.idempotent;
  rep.data["hermitian_defect"] = res.hermitian;
  int lo = t.n, hi = 0;
  for (const auto& m : t.matrices) {
    const int k = static_cast<int>(std::lround(m.trace().real()));
    lo = std::min(lo, k);
    hi = std::max(hi, k);
  }
  rep.data["rank_min"] = lo;
  rep.data["rank_max"] = hi;
  if (pr.compactification || right.compactification || (p.space->is_compact() && q.space->is_compact())) {
    const auto pc = product_compactification(t.space, pr.compactification, right.compactification);
    if (pc) {
      auto ext = extend_field(t, pc, r.cfg.tol.boundary);
      rep.data["extends"] = std::holds_alternative<ProjectionField>(ext);
      if (auto* bad = std::get_if<NotExtendable>(&ext)) rep.data["witness"] = io::to_json(*bad);
    }
  }
  r.emit("tensor", rep);
  return 0;
}

int cmd_pushforward(const Run& r) {
  const auto pr = r.problem();
  const auto map = io::map_from_json(r.section(pr, "map"), pr);
  ProjectionField p;
  try {
    p = extended_field(pr, r.cfg.tol);
  } catch (const NotExtendable& bad) {
    io::Report rep{"pushforward"};
    rep.data["extends"] = false;
    rep.data["witness"] = io::to_json(bad);
    r.emit("pushforward", rep);
    return 1;
  }
  const auto q = pushforward(p, map.source, map.phi, map.source_compactification, map.boundary_map);
  io::Report rep{"pushforward"};
  rep.data["source_vertices"] = map.source->size();
  rep.data["target_vertices"] = p.space->size();
  const auto res = residuals(q);
  rep.data["idempotency_defect"] = res.idempotent;
  for (const auto& [name, f] : {std::pair<const char*, const ProjectionField*>{"target", &p}, {"source", &q}}) {
    try {
      rep.data["chern"][name] = chern_number(*f).value;
    } catch (const NotClosedSurface&) {
      rep.data["chern"][name] = nullptr;
    }
  }
  r.emit("pushforward", rep);
  return 0;
}

int cmd_hopf_demo(const Run& r) {
  if (r.opt.level < 1) throw InvalidSpec("--level must be at least 1");
  const auto demo = hopf_demo(r.opt.level, r.cfg.tol);
  io::Report rep{"hopf-demo"};
  rep.data = io::to_json(demo);
  char buf[64];
  std::snprintf(buf, sizeof buf, "seconds: %.3f", demo.seconds);
  rep.volatile_text.push_back(buf);
  r.emit("hopf-demo", rep);
  const bool ok = demo.trivial_chern.value == 0 && std::abs(demo.hopf_chern.value) == 1 && !demo.w_extends;
  return ok ? 0 : 1;
}

int cmd_battery(const Run& r) {
  if (r.opt.count < 1) throw InvalidSpec("--count must be positive");
  const auto recipes = random_battery(r.opt.count, r.cfg.seed);
  io::Report rep{"battery"};
  rep.data["count"] = recipes.size();
  rep.data["seed"] = r.cfg.seed;
  double worst_defect = 0.0, worst_idem = 0.0, worst_inner = 0.0;
  int extended = 0, equal_verdicts = 0;
  Json failures = Json::array();
  for (const auto& recipe : recipes) {
    const auto b = realize(recipe);
    const auto frame = frame_from_partition(b.p, b.cover, b.pou, r.cfg.tol.frame);
    worst_defect = std::max(worst_defect, frame_defect(b.p, frame, r.cfg.tol.in_range));
    const auto st = stabilize(frame, r.cfg.tol.frame);
    worst_idem = std::max(worst_idem, st.idempotency_defect);
    worst_inner = std::max(worst_inner, inner_product_error(st));
    if (b.compactification) {
      const auto out = extend_projection(frame, b.compactification, r.cfg.tol);
      if (std::holds_alternative<ExtensionResult>(out)) ++extended;
      else failures.push_back(recipe.name);
    }
    const auto mi = bundle_module(b);
    EquivalenceOptions eo;
    eo.tol = r.cfg.tol;
    eo.band_width = recipe.cover.width;
    if (equivalence_report(mi.module, mi.compactification, eo).all_equal()) ++equal_verdicts;
  }
  rep.data["worst_frame_defect"] = worst_defect;
  rep.data["worst_idempotency_defect"] = worst_idem;
  rep.data["worst_inner_product_error"] = worst_inner;
  rep.data["extended"] = extended;
  rep.data["equal_verdicts"] = equal_verdicts;
  rep.data["not_extended"] = failures;
  r.emit("battery", rep);
  const bool ok = worst_defect <= r.cfg.tol.frame && worst_idem <= 1e-12 && worst_inner <= 1e-12 && failures.empty();
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frames, stabilization, extension and index computations for discretized vector bundles"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", opt.seed, "random seed (overrides the configuration)");
  app.add_option("--out", opt.out, "directory for report documents and CSV files");
  app.add_option("--format", opt.format, "stdout format")->check(CLI::IsMember({"text", "structured"}));

  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const Run&);
  };
  const Sub subs[] = {
      {"check-frame", "frame defect of a frame against its projection", cmd_check_frame},
      {"stabilize", "stabilization v and the projection v v*", cmd_stabilize},
      {"extend", "extend a framed projection to the compactification", cmd_extend},
      {"equivalence", "verdicts of the four equivalent conditions for a module", cmd_equivalence},
      {"watatani", "index function and the bundle conditions", cmd_watatani},
      {"chern", "first Chern number over a closed surface", cmd_chern},
      {"suspend", "suspension over a line", cmd_suspend},
      {"tensor", "external tensor product with a second problem", cmd_tensor},
      {"pushforward", "pull a field back along a vertex map", cmd_pushforward},
      {"hopf-demo", "trivial and Hopf extensions over the compactified plane", cmd_hopf_demo},
      {"battery", "randomized stabilization and extension suite", cmd_battery},
  };
  int (*chosen)(const Run&) = nullptr;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    if (std::string(s.name) == "hopf-demo") {
      sub->add_option("--level", opt.level, "mesh refinement level (>= 1)");
    } else if (std::string(s.name) == "battery") {
      sub->add_option("--count", opt.count, "number of random bundles");
    } else {
      sub->add_option("--input,input", opt.input, "problem document")->required()->check(CLI::ExistingFile);
    }
    if (std::string(s.name) == "watatani") {
      sub->add_option("--trials", opt.trials, "random families for the numerical index estimate");
      sub->add_option("--family-size", opt.family_size, "vectors per random family");
    }
    sub->callback([&chosen, fn = s.fn] { chosen = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    Run run{opt, opt.config.empty() ? RunConfig{} : io::load_config(opt.config)};
    if (opt.seed) run.cfg.seed = *opt.seed;
    if (!opt.out.empty()) run.cfg.out_dir = opt.out;
    else if (!run.cfg.out_dir.empty()) run.opt.out = run.cfg.out_dir;
    return chosen(run);
  } catch (const InternalInconsistency& e) {
    std::cerr << "internal inconsistency: " << e.what() << "\n";
    return 3;
  } catch (const FrameDefectTooLarge& e) {
    std::cerr << "verdict: " << e.what() << "\n";
    return 1;
  } catch (const NotInRange& e) {
    std::cerr << "verdict: " << e.what() << "\n";
    return 1;
  } catch (const LocalFrameInvalid& e) {
    std::cerr << "verdict: " << e.what() << "\n";
    return 1;
  } catch (const FiniteIndexError& e) {
    std::cerr << "verdict: " << e.what() << "\n";
    return 1;
  } catch (const NotProper& e) {
    std::cerr << "verdict: " << e.what() << "\n";
    return 1;
  } catch (const RankNotConstant& e) {
    std::cerr << "verdict: " << e.what() << "\n";
    return 1;
  } catch (const NotClosedSurface& e) {
    std::cerr << "verdict: " << e.what() << "\n";
    return 1;
  } catch (const DimensionExceeded& e) {
    std::cerr << "verdict: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const Json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  }
}
