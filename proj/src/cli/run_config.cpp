#include "plls/cli/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

#include "plls/descriptor.hpp"

namespace plls::inline PLLS_ABI::cli {

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  std::string section;
  std::string key;
  Setter set;
  Getter get;
};

std::string real_text(double v, int digits = 9) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::size_t to_size(const std::string& s) {
  std::size_t used = 0;
  if (s.empty() || s[0] == '-') throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  const auto v = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  return static_cast<std::size_t>(v);
}

double to_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("expected a number, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::vector<std::uint64_t> to_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split(s, ',')) out.push_back(to_size(part));
  return out;
}

template <class T>
std::string join(const std::vector<T>& values, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + f(values[i]);
  return out;
}

// Shorthands for the common field shapes.
template <class Ref>
Field size_field(std::string section, std::string key, Ref ref) {
  return {section, key, [ref](RunConfig& c, const std::string& v) { ref(c) = to_size(v); },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

template <class Ref>
Field real_field(std::string section, std::string key, Ref ref, int digits = 9) {
  return {section, key,
          [ref](RunConfig& c, const std::string& v) { ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(to_double(v)); },
          [ref, digits](const RunConfig& c) { return real_text(double(ref(const_cast<RunConfig&>(c))), digits); }};
}

template <class Ref>
Field list_field(std::string section, std::string key, Ref ref) {
  return {section, key, [ref](RunConfig& c, const std::string& v) { ref(c) = parse_sizes(v); },
          [ref](const RunConfig& c) { return join_sizes(ref(const_cast<RunConfig&>(c))); }};
}

std::vector<Field> vae_fields(const std::string& section, vae::VaeConfig latent::PllsConfig::*member,
                              std::optional<std::filesystem::path> latent::PllsConfig::*checkpoint) {
  auto v = [member](RunConfig& c) -> vae::VaeConfig& { return c.base.*member; };
  return {
      {section, "kind",
       [v](RunConfig& c, const std::string& s) {
         if (s == "mlp") v(c).kind = vae::VaeKind::Mlp;
         else if (s == "conv") v(c).kind = vae::VaeKind::Conv;
         else throw std::invalid_argument("expected mlp or conv, got '" + s + "'");
       },
       [v](const RunConfig& c) {
         return std::string(v(const_cast<RunConfig&>(c)).kind == vae::VaeKind::Conv ? "conv" : "mlp");
       }},
      list_field(section, "encoder", [v](RunConfig& c) -> auto& { return v(c).encoder_widths; }),
      list_field(section, "decoder", [v](RunConfig& c) -> auto& { return v(c).decoder_widths; }),
      list_field(section, "filters", [v](RunConfig& c) -> auto& { return v(c).conv.filters; }),
      {section, "hidden_activation",
       [v](RunConfig& c, const std::string& s) { v(c).hidden_activation = nn::parse_activation(s); },
       [v](const RunConfig& c) {
         return std::string(nn::activation_name(v(const_cast<RunConfig&>(c)).hidden_activation));
       }},
      {section, "output_activations",
       [v](RunConfig& c, const std::string& s) {
         v(c).output_activations.clear();
         if (s.empty()) return;
         for (const auto& part : split(s, ',')) v(c).output_activations.push_back(nn::parse_activation(part));
       },
       [v](const RunConfig& c) {
         return join<nn::Activation>(v(const_cast<RunConfig&>(c)).output_activations,
                                     [](const nn::Activation& a) { return std::string(nn::activation_name(a)); });
       }},
      size_field(section, "latent_dim", [v](RunConfig& c) -> auto& { return v(c).latent_dim; }),
      real_field(section, "learning_rate", [v](RunConfig& c) -> auto& { return v(c).learning_rate; }),
      size_field(section, "batch_size", [v](RunConfig& c) -> auto& { return v(c).batch_size; }),
      size_field(section, "epochs", [v](RunConfig& c) -> auto& { return v(c).epochs; }),
      real_field(section, "kl_weight", [v](RunConfig& c) -> auto& { return v(c).kl_weight; }),
      {section, "checkpoint",
       [checkpoint](RunConfig& c, const std::string& s) {
         if (s.empty()) c.base.*checkpoint = std::nullopt;
         else c.base.*checkpoint = s;
       },
       [checkpoint](const RunConfig& c) { return c.base.*checkpoint ? (c.base.*checkpoint)->string() : std::string(); }},
  };
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f{
        {"run", "name", [](RunConfig& c, const std::string& s) { c.name = s; },
         [](const RunConfig& c) { return c.name; }},
        {"run", "env", [](RunConfig& c, const std::string& s) { c.base.env.name = s; },
         [](const RunConfig& c) { return c.base.env.name; }},
        size_field("run", "resolution", [](RunConfig& c) -> auto& { return c.base.env.resolution; }),
        {"run", "mode", [](RunConfig& c, const std::string& s) { c.mode = parse_policy_mode(s); },
         [](const RunConfig& c) { return policy_mode_name(c.mode); }},
        {"run", "ablation",
         [](RunConfig& c, const std::string& s) {
           c.ablations.clear();
           for (const auto& part : split(s, ',')) c.ablations.push_back(latent::parse_mode(part));
         },
         [](const RunConfig& c) {
           return join<latent::AblationMode>(c.ablations,
                                             [](const latent::AblationMode& m) { return std::string(latent::mode_name(m)); });
         }},
        {"run", "seeds", [](RunConfig& c, const std::string& s) { c.seeds = to_seeds(s); },
         [](const RunConfig& c) {
           return join<std::uint64_t>(c.seeds, [](const std::uint64_t& s) { return std::to_string(s); });
         }},
        {"run", "output",
         [](RunConfig& c, const std::string& s) {
           if (s.empty()) c.output = std::nullopt;
           else c.output = s;
         },
         [](const RunConfig& c) { return c.output ? c.output->string() : std::string(); }},
        {"run", "stop_return",
         [](RunConfig& c, const std::string& s) {
           if (s.empty()) c.stop_return = std::nullopt;
           else c.stop_return = to_double(s);
         },
         [](const RunConfig& c) { return c.stop_return ? real_text(*c.stop_return, 17) : std::string(); }},
        {"run", "stop_max_length",
         [](RunConfig& c, const std::string& s) {
           if (s.empty()) c.stop_max_length = std::nullopt;
           else c.stop_max_length = to_double(s);
         },
         [](const RunConfig& c) { return c.stop_max_length ? real_text(*c.stop_max_length, 17) : std::string(); }},

        size_field("collect", "trajectories", [](RunConfig& c) -> auto& { return c.base.collect_trajectories; }),
        size_field("collect", "max_len", [](RunConfig& c) -> auto& { return c.base.collect_max_len; }),
        size_field("collect", "state_train_count", [](RunConfig& c) -> auto& { return c.base.state_train_count; }),
        real_field("collect", "state_train_fraction", [](RunConfig& c) -> auto& { return c.base.state_train_fraction; }, 17),
        size_field("collect", "action_train_count", [](RunConfig& c) -> auto& { return c.base.action_train_count; }),
        real_field("collect", "action_train_fraction", [](RunConfig& c) -> auto& { return c.base.action_train_fraction; }, 17),

        size_field("ppo", "horizon", [](RunConfig& c) -> auto& { return c.base.ppo.horizon; }),
        real_field("ppo", "learning_rate", [](RunConfig& c) -> auto& { return c.base.ppo.learning_rate; }),
        size_field("ppo", "epochs", [](RunConfig& c) -> auto& { return c.base.ppo.n_epochs; }),
        size_field("ppo", "minibatch", [](RunConfig& c) -> auto& { return c.base.ppo.minibatch_size; }),
        size_field("ppo", "envs", [](RunConfig& c) -> auto& { return c.base.ppo.n_envs; }),
        real_field("ppo", "gamma", [](RunConfig& c) -> auto& { return c.base.ppo.gamma; }),
        real_field("ppo", "lambda", [](RunConfig& c) -> auto& { return c.base.ppo.lambda; }),
        real_field("ppo", "clip", [](RunConfig& c) -> auto& { return c.base.ppo.clip; }),
        real_field("ppo", "vf_coeff", [](RunConfig& c) -> auto& { return c.base.ppo.vf_coeff; }),
        real_field("ppo", "entropy_coeff", [](RunConfig& c) -> auto& { return c.base.ppo.entropy_coeff; }),
        real_field("ppo", "reward_scale", [](RunConfig& c) -> auto& { return c.base.ppo.reward_scale; }),
        real_field("ppo", "max_grad_norm", [](RunConfig& c) -> auto& { return c.base.ppo.max_grad_norm; }),
        size_field("ppo", "iterations", [](RunConfig& c) -> auto& { return c.base.ppo.total_iterations; }),
        size_field("ppo", "eval_interval", [](RunConfig& c) -> auto& { return c.base.ppo.eval_interval; }),
        size_field("ppo", "eval_episodes", [](RunConfig& c) -> auto& { return c.base.ppo.eval_episodes; }),
        size_field("ppo", "save_interval", [](RunConfig& c) -> auto& { return c.base.ppo.save_interval; }),
        real_field("ppo", "target_return", [](RunConfig& c) -> auto& { return c.base.ppo.target_return; }, 17),

        list_field("policy", "hidden", [](RunConfig& c) -> auto& { return c.base.policy_hidden; }),
        real_field("policy", "init_log_std", [](RunConfig& c) -> auto& { return c.base.init_log_std; }),
        real_field("policy", "mean_init_scale", [](RunConfig& c) -> auto& { return c.base.mean_init_scale; }),
        {"policy", "state_noise", [](RunConfig& c, const std::string& s) { c.base.state_noise = to_bool(s); },
         [](const RunConfig& c) { return std::string(c.base.state_noise ? "true" : "false"); }},
    };
    for (auto& x : vae_fields("state_vae", &latent::PllsConfig::state_vae, &latent::PllsConfig::state_checkpoint))
      f.push_back(std::move(x));
    for (auto& x : vae_fields("action_vae", &latent::PllsConfig::action_vae, &latent::PllsConfig::action_checkpoint))
      f.push_back(std::move(x));
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

std::string valid_keys(const std::string& section) {
  std::string out;
  for (const auto& f : fields()) {
    if (f.section == section) out += (out.empty() ? "" : ", ") + f.key;
  }
  if (section == "run") out += ", preset";
  return out;
}

bool known_section(const std::string& s) {
  for (const auto& f : fields()) {
    if (f.section == s) return true;
  }
  return false;
}

}  // namespace

std::string policy_mode_name(PolicyMode m) { return m == PolicyMode::Ppo ? "ppo" : "plls"; }

PolicyMode parse_policy_mode(const std::string& name) {
  if (name == "plls") return PolicyMode::Plls;
  if (name == "ppo") return PolicyMode::Ppo;
  throw std::invalid_argument("unknown policy mode '" + name + "' (valid: plls, ppo)");
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"mountaincar-plls", "mountaincar-ppo", "pixelracer-plls",
                                              "pixelracer-ppo"};
  return names;
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.name = name;
  if (name == "mountaincar-plls") {
    c.base = latent::mountaincar_plls();
    c.ablations = {latent::AblationMode::ActionOnly};
  } else if (name == "mountaincar-ppo") {
    c.base = latent::mountaincar_ppo();
    c.mode = PolicyMode::Ppo;
    c.ablations = {latent::AblationMode::Neither};
  } else if (name == "pixelracer-plls") {
    c.base = latent::pixelracer_plls();
    c.ablations = {latent::AblationMode::Both};
  } else if (name == "pixelracer-ppo") {
    c.base = latent::pixelracer_ppo();
    c.mode = PolicyMode::Ppo;
    c.ablations = {latent::AblationMode::Neither};
  } else {
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw UsageError("unknown preset '" + name + "' (valid: " + valid + ")");
  }
  return c;
}

latent::PllsConfig RunConfig::trial(latent::AblationMode ablation, std::uint64_t seed) const {
  latent::PllsConfig c = base;
  c.mode = mode == PolicyMode::Ppo ? latent::AblationMode::Neither : ablation;
  c.collect_seed = seed;
  c.ppo.seed = seed;
  c.state_vae.seed = seed;
  c.action_vae.seed = seed;
  // Input shapes follow the environment.
  const auto env = envs::make_env(c.env);
  if (c.state_vae.kind == vae::VaeKind::Conv) {
    const Shape shape = env->observation_shape();
    if (shape.size() == 3) {
      c.state_vae.conv.channels = shape[0];
      c.state_vae.conv.resolution = shape[1];
    }
  } else {
    c.state_vae.input_dim = env->observation_size();
  }
  c.action_vae.input_dim = env->action_box().dim();
  return c;
}

void RunConfig::validate() const {
  try {
    if (name.empty()) throw std::invalid_argument("[run] name must not be empty");
    if (name.find('/') != std::string::npos) throw std::invalid_argument("[run] name must not contain '/'");
    if (ablations.empty()) throw std::invalid_argument("[run] ablation needs at least one condition");
    if (seeds.empty()) throw std::invalid_argument("[run] seeds needs at least one seed");
    envs::make_env(base.env);
    for (auto a : ablations) {
      const auto c = trial(a, seeds.front());
      c.validate();
      if (c.action_vae.output_activations.size() > 1 && c.action_vae.output_activations.size() != c.action_vae.input_dim) {
        throw std::invalid_argument("[action_vae] output_activations needs 1 or " +
                                    std::to_string(c.action_vae.input_dim) + " entries");
      }
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

RunConfig parse_run_config(std::istream& in, const std::string& label) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw UsageError(label + ": " + e.message() + " at line " + std::to_string(e.line()));
  }
  RunConfig c;
  if (const auto run = tree.get_child_optional("run")) {
    if (const auto p = run->get_optional<std::string>("preset")) c = preset(*p);
  }
  for (const auto& [section, keys] : tree) {
    if (!known_section(section)) {
      throw UsageError(label + ": unknown section [" + section +
                       "] (valid: run, collect, state_vae, action_vae, ppo, policy)");
    }
    if (!keys.data().empty()) throw UsageError(label + ": key '" + section + "' outside any section");
    c.sections.push_back(section);
    for (const auto& [key, value] : keys) {
      if (section == "run" && key == "preset") continue;
      const Field* f = find_field(section, key);
      if (!f) {
        throw UsageError(label + ": unknown key '" + key + "' in [" + section + "] (valid: " + valid_keys(section) + ")");
      }
      try {
        f->set(c, value.data());
      } catch (const std::exception& e) {
        throw UsageError(label + ": [" + section + "] " + key + ": " + e.what());
      }
    }
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path.string());
  return parse_run_config(in, path.string());
}

void write_run_config(std::ostream& out, const RunConfig& config) {
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      out << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
      section = f.section;
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
}

}  // namespace plls::inline PLLS_ABI::cli
