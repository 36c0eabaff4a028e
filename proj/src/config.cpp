#include "tcwm/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "tcwm/errors.hpp"
#include "tcwm/presets_embedded.hpp"

using nlohmann::json;

namespace tcwm {
namespace {

// Integers built in code are signed in nlohmann::json; parsed text is unsigned.
bool non_negative_integer(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Reads keys of one object, remembering which were consumed so leftovers can
// be reported as unknown.
class Section {
public:
    Section(const json& node, const std::string& path, std::vector<std::string>& unknown)
        : node_(&node), path_(path), unknown_(unknown) {
        if (!node.is_object()) throw ValidationError("config: '" + (path.empty() ? "<root>" : path) + "' must be an object");
    }
    template <typename T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!node_ || !node_->contains(key)) return;
        const json& v = node_->at(key);
        try {
            if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
                if (!non_negative_integer(v)) throw ValidationError("");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ValidationError("");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ValidationError("");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ValidationError("");
            }
            out = v.get<T>();
        } catch (const std::exception&) {
            throw ValidationError("config: '" + full(key) + "' has the wrong type (" + v.dump() + ")");
        }
    }

    template <typename Parse>
    void get_enum(const std::string& key, Parse parse) {
        std::string s;
        seen_.insert(key);
        if (!node_ || !node_->contains(key)) return;
        get(key, s);
        parse(s);
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        if (!node_ || !node_->contains(key)) return nullptr;
        return &node_->at(key);
    }

    std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() {
        if (!node_) return;
        for (const auto& item : node_->items()) {
            if (!seen_.count(item.key())) unknown_.push_back(full(item.key()));
        }
    }

private:
    const json* node_ = nullptr;
    std::string path_;
    std::vector<std::string>& unknown_;
    std::set<std::string> seen_;
};

void parse_world(Section& s, std::vector<std::string>& unknown, WorldSection& w) {
    s.get_enum("kind", [&](const std::string& v) {
        if (v == "synthetic") w.kind = WorldKind::synthetic;
        else if (v == "nav") w.kind = WorldKind::nav;
        else throw ValidationError("config: world.kind must be 'synthetic' or 'nav', got '" + v + "'");
    });
    auto& sp = w.spec;
    s.get("d_s", sp.d_s);
    s.get("d_c", sp.d_c);
    s.get("d_x", sp.d_x);
    s.get("d_a", sp.d_a);
    s.get_enum("dynamics", [&](const std::string& v) { sp.dynamics = parse_dynamics_mode(v); });
    s.get_enum("mixing", [&](const std::string& v) { sp.mixing = parse_mixing_mode(v); });
    s.get_enum("proprio", [&](const std::string& v) { sp.proprio = parse_proprio_mode(v); });
    s.get("sigma_x", sp.sigma_x);
    s.get("sigma_z", sp.sigma_z);
    s.get("action_low", sp.action_low);
    s.get("action_high", sp.action_high);
    s.get("state_bound", sp.state_bound);
    s.get("episodes", w.generate.n_traj);
    s.get("horizon", w.generate.horizon);
    s.get_enum("policy", [&](const std::string& v) { w.generate.policy = parse_policy(v); });
    s.get("renders", w.generate.renders);

    if (const json* nav = s.child("nav")) {
        Section n(*nav, s.full("nav"), unknown);
        n.get("step_scale", w.nav.step_scale);
        n.get("goal_tolerance", w.nav.goal_tolerance);
        if (const json* walls = n.child("walls")) {
            if (!walls->is_array()) throw ValidationError("config: world.nav.walls must be an array");
            w.nav.walls.clear();
            for (const auto& seg : *walls) {
                if (!seg.is_array() || seg.size() != 4) {
                    throw ValidationError("config: each wall is [x0, y0, x1, y1], got " + seg.dump());
                }
                for (const auto& c : seg) {
                    if (!c.is_number()) throw ValidationError("config: wall coordinates must be numbers");
                }
                w.nav.walls.push_back({seg[0].get<double>(), seg[1].get<double>(), seg[2].get<double>(),
                                       seg[3].get<double>()});
            }
        }
        n.finish();
    }
}

void parse_model(Section& s, ModelConfig& m) {
    s.get("d_z", m.d_z);
    s.get("d_s", m.d_s);
    s.get("d_pe", m.d_pe);
    s.get("align_dim", m.align_dim);
    s.get("history", m.history);
    s.get("hidden", m.hidden);
    s.get("depth", m.depth);
    s.get("align_full_latent", m.align_full_latent);
    s.get("visual_decoder", m.visual_decoder);
}

void parse_training(Section& s, TrainConfig& t) {
    s.get_enum("mode", [&](const std::string& v) { t.loss.mode = parse_train_mode(v); });
    s.get("epochs", t.epochs);
    s.get("batch", t.batch);
    s.get("lr", t.lr);
    s.get("eval_fraction", t.eval_fraction);
    s.get("lambda_dyn_z", t.loss.weights.dyn_z);
    s.get("lambda_dyn_s", t.loss.weights.dyn_s);
    s.get("lambda_align", t.loss.weights.align);
    s.get("lambda_rec", t.loss.weights.rec);
    s.get("lambda_l1", t.loss.weights.l1);
    s.get("tau", t.loss.weights.tau);
    s.get("stop_grad_target", t.loss.stop_grad_target);
    s.get("detach_rec_target", t.loss.detach_rec_target);
    s.get("infonce_include_positive", t.loss.infonce_include_positive);
}

void parse_planner(Section& s, std::vector<std::string>& unknown, PlannerSection& p) {
    s.get_enum("kind", [&](const std::string& v) {
        if (v == "cem") p.kind = PlannerKind::cem;
        else if (v == "ldp") p.kind = PlannerKind::ldp;
        else throw ValidationError("config: planner.kind must be 'cem' or 'ldp', got '" + v + "'");
    });
    s.get("episodes", p.episodes);
    s.get("max_steps", p.max_steps);
    if (const json* cem = s.child("cem")) {
        Section c(*cem, s.full("cem"), unknown);
        c.get("population", p.cem.population);
        c.get("elites", p.cem.elites);
        c.get("iterations", p.cem.iterations);
        c.get("horizon", p.cem.horizon);
        c.get("execute", p.cem.execute);
        c.get("std_floor", p.cem.std_floor);
        c.get("reinflate_std", p.cem.reinflate_std);
        c.finish();
    }
    if (const json* d = s.child("diffusion")) {
        Section c(*d, s.full("diffusion"), unknown);
        c.get("steps", p.diffusion.steps);
        c.get("beta_start", p.diffusion.beta_start);
        c.get("beta_end", p.diffusion.beta_end);
        c.get("horizon", p.diffusion.horizon);
        c.get("execute", p.diffusion.execute);
        c.get("hidden", p.diffusion.hidden);
        c.get("depth", p.diffusion.depth);
        c.get("epochs", p.diffusion.epochs);
        c.get("batch", p.diffusion.batch);
        c.get("lr", p.diffusion.lr);
        c.finish();
    }
}

void parse_eval(Section& s, EvalSection& e) {
    s.get("probe", e.probe);
    s.get("assumptions", e.assumptions);
    s.get("robustness", e.robustness);
    s.get("folds", e.folds);
    s.get("ridge_alpha", e.ridge_alpha);
    s.get("a1_pairs", e.a1_pairs);
    s.get("a1_delta", e.a1_delta);
    s.get("a2_pairs", e.a2_pairs);
    s.get("rollout_horizon", e.rollout_horizon);
}

}  // namespace

std::string to_string(WorldKind k) { return k == WorldKind::nav ? "nav" : "synthetic"; }
std::string to_string(PlannerKind k) { return k == PlannerKind::ldp ? "ldp" : "cem"; }

ModelConfig ExperimentConfig::resolved_model() const {
    ModelConfig m = model;
    m.d_x = world.spec.d_x;
    m.d_p = world.spec.d_s;
    m.d_a = world.spec.d_a;
    if (m.d_z == 0) m.d_z = world.spec.d_z();
    if (m.d_s == 0) m.d_s = std::min(world.spec.d_s, m.d_z);
    m.direct_embedding = training.loss.mode == TrainMode::direct_embedding;
    return m;
}

TrainConfig ExperimentConfig::resolved_training() const {
    TrainConfig t = training;
    t.seed = derive_seed(seed, 0x747261696e);
    return t;
}

void ExperimentConfig::validate() const {
    world.spec.validate();
    if (world.kind == WorldKind::nav && world.spec.d_s != 2) {
        throw ValidationError("config: world.kind 'nav' needs world.d_s == 2 (planar position)");
    }
    if (world.generate.n_traj < 1 || world.generate.horizon < 2) {
        throw ValidationError("config: world.episodes must be >= 1 and world.horizon >= 2");
    }
    if (world.generate.renders && world.kind != WorldKind::nav) {
        throw ValidationError("config: world.renders needs world.kind 'nav'");
    }
    if (model.visual_decoder && !world.generate.renders) {
        throw ValidationError("config: model.visual_decoder needs world.renders");
    }
    resolved_model().validate();
    training.validate();
    CemConfig cem = planner.cem;
    cem.action_low = world.spec.action_low;
    cem.action_high = world.spec.action_high;
    cem.validate();
    planner.diffusion.validate();
    if (planner.episodes < 1 || planner.max_steps < 1) {
        throw ValidationError("config: planner.episodes and planner.max_steps must be >= 1");
    }
    if (eval.folds < 2) throw ValidationError("config: eval.folds must be >= 2");
    if (!(eval.ridge_alpha > 0)) throw ValidationError("config: eval.ridge_alpha must be > 0");
    if (eval.a1_pairs < 1 || eval.a2_pairs < 1) throw ValidationError("config: eval pair counts must be >= 1");
    if (!(eval.a1_delta > 0)) throw ValidationError("config: eval.a1_delta must be > 0");
    if (eval.rollout_horizon < 1) throw ValidationError("config: eval.rollout_horizon must be >= 1");
    const std::size_t dz = resolved_model().d_z;
    for (std::size_t s : sweep.split_sizes) {
        if (s < 1 || s > dz) throw ValidationError("config: sweep.split_sizes entries must lie in [1, d_z]");
    }
}

json ExperimentConfig::to_json() const {
    const auto& sp = world.spec;
    json walls = json::array();
    for (const auto& w : world.nav.walls) walls.push_back({w.x0, w.y0, w.x1, w.y1});
    return {
        {"seed", seed},
        {"output", output},
        {"world",
         {{"kind", to_string(world.kind)},
          {"d_s", sp.d_s},
          {"d_c", sp.d_c},
          {"d_x", sp.d_x},
          {"d_a", sp.d_a},
          {"dynamics", to_string(sp.dynamics)},
          {"mixing", to_string(sp.mixing)},
          {"proprio", to_string(sp.proprio)},
          {"sigma_x", sp.sigma_x},
          {"sigma_z", sp.sigma_z},
          {"action_low", sp.action_low},
          {"action_high", sp.action_high},
          {"state_bound", sp.state_bound},
          {"episodes", world.generate.n_traj},
          {"horizon", world.generate.horizon},
          {"policy", to_string(world.generate.policy)},
          {"renders", world.generate.renders},
          {"nav",
           {{"step_scale", world.nav.step_scale}, {"goal_tolerance", world.nav.goal_tolerance}, {"walls", walls}}}}},
        {"model",
         {{"d_z", model.d_z},
          {"d_s", model.d_s},
          {"d_pe", model.d_pe},
          {"align_dim", model.align_dim},
          {"history", model.history},
          {"hidden", model.hidden},
          {"depth", model.depth},
          {"align_full_latent", model.align_full_latent},
          {"visual_decoder", model.visual_decoder}}},
        {"training",
         {{"mode", to_string(training.loss.mode)},
          {"epochs", training.epochs},
          {"batch", training.batch},
          {"lr", training.lr},
          {"eval_fraction", training.eval_fraction},
          {"lambda_dyn_z", training.loss.weights.dyn_z},
          {"lambda_dyn_s", training.loss.weights.dyn_s},
          {"lambda_align", training.loss.weights.align},
          {"lambda_rec", training.loss.weights.rec},
          {"lambda_l1", training.loss.weights.l1},
          {"tau", training.loss.weights.tau},
          {"stop_grad_target", training.loss.stop_grad_target},
          {"detach_rec_target", training.loss.detach_rec_target},
          {"infonce_include_positive", training.loss.infonce_include_positive}}},
        {"planner",
         {{"kind", to_string(planner.kind)},
          {"episodes", planner.episodes},
          {"max_steps", planner.max_steps},
          {"cem",
           {{"population", planner.cem.population},
            {"elites", planner.cem.elites},
            {"iterations", planner.cem.iterations},
            {"horizon", planner.cem.horizon},
            {"execute", planner.cem.execute},
            {"std_floor", planner.cem.std_floor},
            {"reinflate_std", planner.cem.reinflate_std}}},
          {"diffusion",
           {{"steps", planner.diffusion.steps},
            {"beta_start", planner.diffusion.beta_start},
            {"beta_end", planner.diffusion.beta_end},
            {"horizon", planner.diffusion.horizon},
            {"execute", planner.diffusion.execute},
            {"hidden", planner.diffusion.hidden},
            {"depth", planner.diffusion.depth},
            {"epochs", planner.diffusion.epochs},
            {"batch", planner.diffusion.batch},
            {"lr", planner.diffusion.lr}}}}},
        {"eval",
         {{"probe", eval.probe},
          {"assumptions", eval.assumptions},
          {"robustness", eval.robustness},
          {"folds", eval.folds},
          {"ridge_alpha", eval.ridge_alpha},
          {"a1_pairs", eval.a1_pairs},
          {"a1_delta", eval.a1_delta},
          {"a2_pairs", eval.a2_pairs},
          {"rollout_horizon", eval.rollout_horizon}}},
        {"sweep", {{"split_sizes", sweep.split_sizes}}},
    };
}

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    c.model.d_z = 0;
    c.model.d_s = 0;
    std::vector<std::string> unknown;
    Section root(j, "", unknown);
    root.get("seed", c.seed);
    root.get("output", c.output);
    if (const json* w = root.child("world")) {
        Section s(*w, "world", unknown);
        parse_world(s, unknown, c.world);
        s.finish();
    }
    if (const json* m = root.child("model")) {
        Section s(*m, "model", unknown);
        parse_model(s, c.model);
        s.finish();
    }
    if (const json* t = root.child("training")) {
        Section s(*t, "training", unknown);
        parse_training(s, c.training);
        s.finish();
    }
    if (const json* p = root.child("planner")) {
        Section s(*p, "planner", unknown);
        parse_planner(s, unknown, c.planner);
        s.finish();
    }
    if (const json* e = root.child("eval")) {
        Section s(*e, "eval", unknown);
        parse_eval(s, c.eval);
        s.finish();
    }
    if (const json* sw = root.child("sweep")) {
        Section s(*sw, "sweep", unknown);
        if (const json* sizes = s.child("split_sizes")) {
            if (!sizes->is_array()) throw ValidationError("config: sweep.split_sizes must be an array");
            for (const auto& v : *sizes) {
                if (!non_negative_integer(v)) throw ValidationError("config: sweep.split_sizes entries must be unsigned");
                c.sweep.split_sizes.push_back(v.get<std::size_t>());
            }
        }
        s.finish();
    }
    root.finish();
    if (!unknown.empty()) {
        std::sort(unknown.begin(), unknown.end());
        std::string msg = "config: unknown keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ValidationError(msg);
    }
    c.world.spec.seed = c.seed;
    c.world.generate.seed = derive_seed(c.seed, 0x67656e);
    c.validate();
    return c;
}

json load_config_json(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ValidationError("config: cannot open " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ValidationError("config: " + file.string() + " is not valid JSON: " + e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& file) { return parse_config(load_config_json(file)); }

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto* p = embedded::kPresets; !p->first.empty(); ++p) names.emplace_back(p->first);
    return names;
}

json preset_overlay(const std::string& name) {
    for (const auto* p = embedded::kPresets; !p->first.empty(); ++p) {
        if (name == p->first) return json::parse(p->second);
    }
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ValidationError("unknown preset '" + name + "' (known: " + known + ")");
}

json default_config_json() { return json::parse(embedded::kDefaultConfig); }

World make_world(const ExperimentConfig& cfg) { return build_world(cfg.world.spec); }

NavEnv make_nav(const ExperimentConfig& cfg) {
    if (cfg.world.kind != WorldKind::nav) throw ValidationError("config: world.kind is not 'nav'");
    return build_nav(cfg.world.spec, cfg.world.nav);
}

TrajectoryBatch generate(const ExperimentConfig& cfg) {
    if (cfg.world.kind == WorldKind::nav) return generate_dataset(make_nav(cfg), cfg.world.generate);
    return generate_dataset(make_world(cfg), cfg.world.generate);
}

}  // namespace tcwm
