/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "s2v/analysis.hpp"
#include "s2v/description.hpp"
#include "s2v/ontology.hpp"
#include "s2v/pipeline.hpp"
#include "s2v/scenegraph.hpp"
#include "s2v/selector.hpp"
#include "s2v/stages.hpp"
#include "s2v/synthesis.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

void emit(const std::string& text, const std::optional<std::string>& out_path) {
  if (out_path) {
    s2v::write_file(*out_path, text);
  } else {
    std::cout << text;
  }
}

/// "1.5" -> number, "true" -> boolean, "1,2,3" -> vector3, rest -> string.
s2v::AttrValue parse_attr_value(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  {
    double x = 0, y = 0, z = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%lf,%lf,%lf%c", &x, &y, &z, &tail) == 3)
      return s2v::Vec3{x, y, z};
  }
  try {
    size_t used = 0;
    const double value = std::stod(text, &used);
    if (used == text.size()) return value;
  } catch (const std::logic_error&) {
  }
  return text;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw s2v::ParseError("expected true/false, got '" + text + "'");
}

/// Request extras of the form "param.<stage>.<name>" override stage
/// parameters the rules left unset.
void bind_request_params(s2v::PipelinePlan& plan, const s2v::Request& request) {
  for (const auto& [key, value] : request.extra) {
    if (key.rfind("param.", 0) != 0) continue;
    const size_t dot = key.find('.', 6);
    if (dot == std::string::npos)
      throw s2v::SchemaError("bad request extra '" + key +
                             "' (want param.<stage>.<name>)");
    const std::string stage = key.substr(6, dot - 6);
    const std::string name = key.substr(dot + 1);
    for (auto& spec : plan.stages) {
      if (spec.stage_id != stage || spec.params.count(name)) continue;
      s2v::Json parsed = s2v::Json::parse(value, nullptr, false);
      spec.params[name] =
          (!parsed.is_discarded() && parsed.is_primitive() && !parsed.is_null())
              ? parsed
              : s2v::Json(value);
    }
  }
}

std::map<s2v::Kind, fs::path> parse_input_bindings(
    const std::vector<std::string>& bindings) {
  std::map<s2v::Kind, fs::path> inputs;
  for (const auto& binding : bindings) {
    const size_t eq = binding.find('=');
    if (eq == std::string::npos)
      throw s2v::ParseError("input binding '" + binding + "' is not kind=path");
    inputs[s2v::kind_from_name(binding.substr(0, eq))] = binding.substr(eq + 1);
  }
  return inputs;
}

int cmd_validate(const std::optional<std::string>& ontology_path,
                 const std::optional<std::string>& rules_path,
                 const std::optional<std::string>& graph_path) {
  bool valid = true;
  std::optional<s2v::OntologySchema> schema;
  if (ontology_path) {
    schema = s2v::load_ontology(s2v::read_file(*ontology_path));
    std::cout << "ontology: ok (" << schema->classes.size() << " classes, "
              << schema->relation_defs.size() << " relations)\n";
  }
  if (rules_path) {
    const auto rules = s2v::load_rules(s2v::read_file(*rules_path));
    std::cout << "rules: ok (" << rules.rules.size() << " rules)\n";
  }
  if (graph_path) {
    const auto artifact = s2v::load_graph_artifact(*graph_path);
    std::cout << "graph: structurally ok (" << artifact.graph.entities.size()
              << " entities, " << artifact.graph.relations.size()
              << " relations)\n";
    if (schema) {
      const auto report = s2v::validate_graph(*schema, artifact.graph);
      for (const auto& v : report.violations)
        std::cout << "violation [" << s2v::violation_kind_name(v.kind) << "] "
                  << v.subject << ": " << v.detail << "\n";
      std::cout << "graph: " << (report.valid ? "valid" : "invalid")
                << " against ontology\n";
      valid = report.valid;
    }
  }
  return valid ? kExitOk : kExitData;
}

int cmd_analyze(const std::string& detections_path,
                const std::string& poses_path, s2v::TrackParams params,
                int smooth_window, const std::optional<std::string>& out) {
  const auto frames =
      s2v::ingest_detections(s2v::read_file(detections_path));
  auto tracks = s2v::associate_tracks(frames, params);
  if (smooth_window > 1) tracks = s2v::smooth_tracks(tracks, smooth_window);
  const auto result = s2v::attach_poses(tracks, s2v::read_file(poses_path));
  for (const auto& warning : result.warnings)
    std::cerr << "warning: " << warning << "\n";
  emit(s2v::serialize_posed_tracks(result.tracks), out);
  return kExitOk;
}

int cmd_describe(const std::string& detections_path,
                 const std::string& poses_path,
                 const std::string& ontology_path,
                 const std::string& source_id, s2v::TrackParams track_params,
                 s2v::SpatialParams spatial_params,
                 const std::optional<std::string>& out) {
  const auto schema = s2v::load_ontology(s2v::read_file(ontology_path));
  const auto frames = s2v::ingest_detections(s2v::read_file(detections_path));
  const auto tracks = s2v::associate_tracks(frames, track_params);
  const auto attached = s2v::attach_poses(tracks, s2v::read_file(poses_path));
  for (const auto& warning : attached.warnings)
    std::cerr << "warning: " << warning << "\n";
  const std::string document =
      s2v::describe(attached.tracks, schema, spatial_params, source_id);
  const std::string sidecar = s2v::build_mask_sidecar(attached.tracks);
  emit(document, out);
  if (sidecar != "{}\n") {
    const fs::path dir = out ? fs::path(*out).parent_path() : fs::path(".");
    s2v::write_file(dir / s2v::mask_sidecar_name(source_id), sidecar);
  }
  return kExitOk;
}

int cmd_edit(const std::string& graph_path,
             const std::vector<std::string>& set_attr,
             const std::optional<std::string>& remove,
             const std::optional<std::string>& reverse,
             const std::vector<std::string>& relabel,
             const std::optional<std::string>& out) {
  const int requested = (set_attr.empty() ? 0 : 1) + (remove ? 1 : 0) +
                        (reverse ? 1 : 0) + (relabel.empty() ? 0 : 1);
  if (requested != 1)
    throw CLI::ValidationError(
        "edit", "exactly one of --set-attr/--remove/--reverse/--relabel");
  const auto artifact = s2v::load_graph_artifact(graph_path);
  s2v::Edit edit = s2v::SetReverse{false};
  if (!set_attr.empty()) {
    edit = s2v::SetAttribute{set_attr[0], set_attr[1],
                             parse_attr_value(set_attr[2])};
  } else if (remove) {
    edit = s2v::RemoveEntity{*remove};
  } else if (reverse) {
    edit = s2v::SetReverse{parse_bool(*reverse)};
  } else {
    edit = s2v::Relabel{relabel[0], relabel[1]};
  }
  const s2v::SceneGraph edited = s2v::apply_edit(artifact.graph, edit);
  emit(s2v::serialize(edited), out);
  // Keep mask sidecars resolvable next to the edited document.
  if (out) {
    const fs::path dir = fs::absolute(*out).parent_path();
    if (!fs::equivalent(dir, fs::absolute(artifact.dir))) {
      std::set<std::string> sidecars;
      for (const auto& fp : edited.frames)
        for (const auto& p : fp.payloads)
          if (p.kind == s2v::PayloadKind::kMaskRef) {
            const auto& ref = std::get<std::string>(p.data);
            sidecars.insert(ref.substr(0, ref.find('#')));
          }
      for (const auto& name : sidecars)
        if (fs::exists(artifact.dir / name))
          fs::copy_file(artifact.dir / name, dir / name,
                        fs::copy_options::overwrite_existing);
    }
  }
  return kExitOk;
}

int cmd_synthesize(const std::string& graph_path,
                   const std::string& request_path,
                   const std::optional<std::string>& background,
                   const std::optional<std::string>& plate,
                   const std::string& out_dir, s2v::AvatarParams avatar) {
  const auto artifact = s2v::load_graph_artifact(graph_path);
  const auto request = s2v::parse_request(s2v::read_file(request_path));
  const s2v::ScenePlan plan = s2v::plan_scene(artifact.graph, request);
  s2v::SynthesisInputs inputs;
  if (background) inputs.background = *background;
  if (plate) inputs.plate = *plate;
  inputs.graph_dir = artifact.dir;
  inputs.avatar = avatar;
  const auto result = s2v::run_synthesis(artifact.graph, plan, inputs, out_dir);
  for (const auto& warning : result.warnings)
    std::cerr << "warning: " << warning << "\n";
  s2v::write_file(fs::path(out_dir) / "manifest.json", result.manifest);
  std::cout << "wrote " << plan.output_order.size() << " frames to " << out_dir
            << "\n";
  return kExitOk;
}

int cmd_explain(const std::string& rules_path, const std::string& request_path) {
  const auto rules = s2v::load_rules(s2v::read_file(rules_path));
  const auto request = s2v::parse_request(s2v::read_file(request_path));
  const auto registry = s2v::default_registry();
  s2v::SelectionTrace trace;
  const auto plan = s2v::select_plan(rules, request, registry, &trace);
  std::cout << "request fingerprint: " << plan.request_fingerprint << "\n";
  std::cout << "fired rules:";
  for (const auto& id : trace.matched_rule_ids) std::cout << " " << id;
  std::cout << "\nplan:\n";
  for (size_t i = 0; i < plan.stages.size(); ++i) {
    std::cout << "  " << (i + 1) << ". " << plan.stages[i].stage_id;
    if (!plan.stages[i].params.empty()) {
      s2v::Json params = s2v::Json::object();
      for (const auto& [k, v] : plan.stages[i].params) params[k] = v;
      std::cout << " " << params.dump();
    }
    std::cout << "\n";
  }
  return kExitOk;
}

int cmd_run(const std::string& rules_path, const std::string& ontology_path,
            const std::string& request_path,
            const std::vector<std::string>& input_bindings,
            std::string store_path, const std::optional<std::string>& out_dir,
            const std::optional<std::string>& report_path) {
  const auto rules = s2v::load_rules(s2v::read_file(rules_path));
  const auto request = s2v::parse_request(s2v::read_file(request_path));
  const auto registry = s2v::default_registry();
  auto plan = s2v::select_plan(rules, request, registry);
  bind_request_params(plan, request);

  auto inputs = parse_input_bindings(input_bindings);
  inputs[s2v::Kind::kOntology] = ontology_path;
  if (store_path.empty()) {
    const char* env = std::getenv("SCENE2VIRT_STORE");
    store_path = env != nullptr ? env : ".scene2virt_store";
  }
  s2v::ArtifactStore store{store_path};
  const s2v::RunReport report = s2v::run_pipeline(plan, inputs, store, registry);

  for (const auto& stage : report.executed)
    std::cout << "executed  " << stage << "\n";
  for (const auto& stage : report.cache_hits)
    std::cout << "cache-hit " << stage << "\n";
  for (const auto& [kind, path] : report.outputs)
    std::cout << "output " << s2v::kind_name(kind) << " " << path.string()
              << "\n";
  for (const auto& warning : report.log)
    std::cerr << "warning: " << warning << "\n";

  if (out_dir) {
    fs::create_directories(*out_dir);
    for (const auto& [kind, path] : report.outputs) {
      const fs::path target = fs::path(*out_dir) / s2v::kind_name(kind);
      fs::remove_all(target);
      fs::copy(path, target,
               fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    }
  }
  if (report_path) {
    s2v::Json outputs = s2v::Json::object();
    for (const auto& [kind, path] : report.outputs)
      outputs[s2v::kind_name(kind)] = path.string();
    s2v::Json times = s2v::Json::object();
    for (const auto& [stage, ms] : report.wall_times_ms) times[stage] = ms;
    s2v::write_file(*report_path,
                    s2v::Json{{"executed", report.executed},
                              {"cache_hits", report.cache_hits},
                              {"outputs", outputs},
                              {"wall_times_ms", times},
                              {"log", report.log}}
                            .dump() +
                        "\n");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visual-to-virtual scene pipeline"};
  app.require_subcommand(1);

  // validate
  auto* validate = app.add_subcommand("validate", "check ontology/rules/graph files");
  std::optional<std::string> v_ontology, v_rules, v_graph;
  validate->add_option("--ontology", v_ontology, "ontology document");
  validate->add_option("--rules", v_rules, "rules document");
  validate->add_option("--graph", v_graph, "scene graph document");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "detections + poses -> tracks");
  std::string a_detections, a_poses;
  std::optional<std::string> a_out;
  s2v::TrackParams a_params;
  int a_smooth = 1;
  analyze->add_option("--detections", a_detections)->required();
  analyze->add_option("--poses", a_poses)->required();
  analyze->add_option("--out", a_out, "output file (default stdout)");
  analyze->add_option("--iou-threshold", a_params.iou_threshold);
  analyze->add_option("--max-missed", a_params.max_missed);
  analyze->add_option("--smooth-window", a_smooth, "odd median window");

  // describe
  auto* describe = app.add_subcommand("describe", "analysis -> scene graph document");
  std::string d_detections, d_poses, d_ontology, d_source = "scene";
  std::optional<std::string> d_out;
  s2v::TrackParams d_track;
  s2v::SpatialParams d_spatial;
  describe->add_option("--detections", d_detections)->required();
  describe->add_option("--poses", d_poses)->required();
  describe->add_option("--ontology", d_ontology)->required();
  describe->add_option("--source-id", d_source);
  describe->add_option("--out", d_out, "graph output file (default stdout)");
  describe->add_option("--iou-threshold", d_track.iou_threshold);
  describe->add_option("--max-missed", d_track.max_missed);
  describe->add_option("--near-factor", d_spatial.near_factor);
  describe->add_option("--overlap-min-iou", d_spatial.overlap_min_iou);

  // edit
  auto* edit = app.add_subcommand("edit", "apply one edit to a graph document");
  std::string e_graph;
  std::vector<std::string> e_set, e_relabel;
  std::optional<std::string> e_remove, e_reverse, e_out;
  edit->add_option("--graph", e_graph)->required();
  edit->add_option("--set-attr", e_set, "ENTITY NAME VALUE")->expected(3);
  edit->add_option("--remove", e_remove, "ENTITY");
  edit->add_option("--reverse", e_reverse, "true|false");
  edit->add_option("--relabel", e_relabel, "ENTITY NEW_CLASS")->expected(2);
  edit->add_option("--out", e_out, "output file (default stdout)");

  // synthesize
  auto* synthesize = app.add_subcommand("synthesize", "graph + request -> frames/objs");
  std::string s_graph, s_request, s_out;
  std::optional<std::string> s_background, s_plate;
  s2v::AvatarParams s_avatar;
  synthesize->add_option("--graph", s_graph)->required();
  synthesize->add_option("--request", s_request)->required();
  synthesize->add_option("--background", s_background, "PPM file or frame directory");
  synthesize->add_option("--plate", s_plate, "clean background plate PPM");
  synthesize->add_option("--out", s_out)->required();
  synthesize->add_option("--radius", s_avatar.radius, "bone prism radius");
  synthesize->add_option("--sides", s_avatar.sides, "bone prism sides");

  // run
  auto* run = app.add_subcommand("run", "selector-driven cached pipeline");
  std::string r_rules, r_ontology, r_request, r_store;
  std::vector<std::string> r_inputs;
  std::optional<std::string> r_out, r_report;
  run->add_option("--rules", r_rules)->required();
  run->add_option("--ontology", r_ontology)->required();
  run->add_option("--request", r_request)->required();
  run->add_option("--inputs", r_inputs, "kind=path bindings");
  run->add_option("--store", r_store, "artifact store root ($SCENE2VIRT_STORE)");
  run->add_option("--out", r_out, "copy final outputs here");
  run->add_option("--report", r_report, "write the run report JSON here");

  // explain
  auto* explain = app.add_subcommand("explain", "show the selected plan");
  std::string x_rules, x_request;
  explain->add_option("--rules", x_rules)->required();
  explain->add_option("--request", x_request)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*validate) {
      if (!v_ontology && !v_rules && !v_graph) {
        std::cerr << "validate: nothing to do (pass --ontology/--rules/--graph)\n";
        return kExitUsage;
      }
      return cmd_validate(v_ontology, v_rules, v_graph);
    }
    if (*analyze)
      return cmd_analyze(a_detections, a_poses, a_params, a_smooth, a_out);
    if (*describe)
      return cmd_describe(d_detections, d_poses, d_ontology, d_source, d_track,
                          d_spatial, d_out);
    if (*edit)
      return cmd_edit(e_graph, e_set, e_remove, e_reverse, e_relabel, e_out);
    if (*synthesize)
      return cmd_synthesize(s_graph, s_request, s_background, s_plate, s_out,
                            s_avatar);
    if (*run)
      return cmd_run(r_rules, r_ontology, r_request, r_inputs, r_store, r_out,
                     r_report);
    if (*explain) return cmd_explain(x_rules, x_request);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const s2v::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
