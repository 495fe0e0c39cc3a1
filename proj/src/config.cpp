#include "jointrl/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace jointrl::cli {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::pair<std::string, std::string>> parse_lines(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream is(text);
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long out = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (...) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (...) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      const std::string t = trim(cur);
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string t = trim(cur);
  if (!t.empty()) out.push_back(t);
  return out;
}

aug::AugKind parse_aug_kind(const std::string& key, const std::string& v) {
  if (v == "random_crop") return aug::AugKind::random_crop;
  if (v == "random_translate") return aug::AugKind::random_translate;
  if (v == "center_crop") return aug::AugKind::center_crop;
  if (v == "none") return aug::AugKind::none;
  throw ConfigError("config key '" + key + "': unknown augmentation kind '" + v + "'");
}

const char* aug_kind_name(aug::AugKind k) {
  switch (k) {
    case aug::AugKind::random_crop: return "random_crop";
    case aug::AugKind::random_translate: return "random_translate";
    case aug::AugKind::center_crop: return "center_crop";
    case aug::AugKind::none: return "none";
  }
  return "random_crop";
}

// Returns true when the key belongs to the shared train-config surface.
bool apply_train_key(train::TrainConfig& t, const std::string& key, const std::string& v) {
  auto& enc = t.sac.encoder;
  if (key == "env.name") t.env.name = v;
  else if (key == "env.obs_render_size") t.env.obs_render_size = static_cast<int>(to_long(key, v));
  else if (key == "env.frame_stack") t.env.frame_stack = static_cast<int>(to_long(key, v));
  else if (key == "env.action_repeat") t.env.action_repeat = static_cast<int>(to_long(key, v));
  else if (key == "env.episode_len") t.env.episode_len = static_cast<int>(to_long(key, v));
  else if (key == "env.reward_mode") {
    if (v == "sparse") t.env.reward_mode = env::RewardMode::sparse;
    else if (v == "dense") t.env.reward_mode = env::RewardMode::dense;
    else throw ConfigError("config key 'env.reward_mode': expected sparse|dense, got '" + v + "'");
  } else if (key == "env.distance_threshold") t.env.distance_threshold = to_double(key, v);
  else if (key == "aug.online.kind") t.aug_online.kind = parse_aug_kind(key, v);
  else if (key == "aug.online.m") t.aug_online.m = static_cast<int>(to_long(key, v));
  else if (key == "aug.online.out") t.aug_online.out = static_cast<int>(to_long(key, v));
  else if (key == "aug.target.kind") t.aug_target.kind = parse_aug_kind(key, v);
  else if (key == "aug.target.m") t.aug_target.m = static_cast<int>(to_long(key, v));
  else if (key == "aug.target.out") t.aug_target.out = static_cast<int>(to_long(key, v));
  else if (key == "train.regime") {
    if (v == "alternating") t.regime = train::Regime::alternating;
    else if (v == "summed") t.regime = train::Regime::summed;
    else if (v == "pretrain_then_rl") t.regime = train::Regime::pretrain_then_rl;
    else throw ConfigError("config key 'train.regime': unknown regime '" + v + "'");
  } else if (key == "train.total_env_steps") t.total_env_steps = to_long(key, v);
  else if (key == "train.init_explore_steps") t.init_explore_steps = to_long(key, v);
  else if (key == "train.batch_size") t.batch_size = to_long(key, v);
  else if (key == "train.buffer_capacity") t.buffer_capacity = to_long(key, v);
  else if (key == "train.eval_every") t.eval_every = to_long(key, v);
  else if (key == "train.eval_episodes") t.eval_episodes = static_cast<int>(to_long(key, v));
  else if (key == "train.ssl_lr") t.ssl_lr = static_cast<float>(to_double(key, v));
  else if (key == "train.w_ssl") t.w_ssl = static_cast<float>(to_double(key, v));
  else if (key == "train.pretrain_steps") t.pretrain_steps = to_long(key, v);
  else if (key == "train.pretrain_dataset") t.pretrain_dataset = v;
  else if (key == "sac.discount") t.sac.discount = static_cast<float>(to_double(key, v));
  else if (key == "sac.init_alpha") t.sac.init_alpha = static_cast<float>(to_double(key, v));
  else if (key == "sac.actor_lr") t.sac.actor_lr = static_cast<float>(to_double(key, v));
  else if (key == "sac.critic_lr") t.sac.critic_lr = static_cast<float>(to_double(key, v));
  else if (key == "sac.alpha_lr") t.sac.alpha_lr = static_cast<float>(to_double(key, v));
  else if (key == "sac.net_beta1") t.sac.net_beta1 = static_cast<float>(to_double(key, v));
  else if (key == "sac.alpha_beta1") t.sac.alpha_beta1 = static_cast<float>(to_double(key, v));
  else if (key == "sac.beta2") t.sac.beta2 = static_cast<float>(to_double(key, v));
  else if (key == "sac.encoder_tau") t.sac.encoder_tau = static_cast<float>(to_double(key, v));
  else if (key == "sac.critic_tau") t.sac.critic_tau = static_cast<float>(to_double(key, v));
  else if (key == "sac.head_tau") t.sac.head_tau = static_cast<float>(to_double(key, v));
  else if (key == "sac.actor_update_freq") t.sac.actor_update_freq = static_cast<int>(to_long(key, v));
  else if (key == "sac.target_update_freq") t.sac.target_update_freq = static_cast<int>(to_long(key, v));
  else if (key == "sac.mlp_layers") t.sac.mlp_layers = static_cast<int>(to_long(key, v));
  else if (key == "sac.mlp_hidden") t.sac.mlp_hidden = static_cast<int>(to_long(key, v));
  else if (key == "sac.log_std_min") t.sac.log_std_min = static_cast<float>(to_double(key, v));
  else if (key == "sac.log_std_max") t.sac.log_std_max = static_cast<float>(to_double(key, v));
  else if (key == "sac.target_entropy") t.sac.target_entropy = static_cast<float>(to_double(key, v));
  else if (key == "encoder.conv_layers") enc.conv_layers = static_cast<int>(to_long(key, v));
  else if (key == "encoder.filters") enc.filters = static_cast<int>(to_long(key, v));
  else if (key == "encoder.fc_layers") enc.fc_layers = static_cast<int>(to_long(key, v));
  else if (key == "encoder.repr_dim") enc.repr_dim = static_cast<int>(to_long(key, v));
  else if (key == "encoder.tanh_out") enc.tanh_out = to_bool(key, v);
  else if (key == "encoder.extra_linear") enc.extra_linear = static_cast<int>(to_long(key, v));
  else if (key == "encoder.kernel") enc.kernel = static_cast<int>(to_long(key, v));
  else if (key == "encoder.backbone") {
    if (v == "plain") enc.backbone = agent::Backbone::plain;
    else if (v == "residual_tail") enc.backbone = agent::Backbone::residual_tail;
    else throw ConfigError("config key 'encoder.backbone': unknown backbone '" + v + "'");
  } else if (key == "encoder.strides") {
    enc.strides.clear();
    for (const auto& s : split_list(v)) enc.strides.push_back(static_cast<int>(to_long(key, s)));
  } else if (key == "ssl.proj_hidden") t.ssl_head.proj_hidden = to_long(key, v);
  else if (key == "ssl.proj_out") t.ssl_head.proj_out = to_long(key, v);
  else if (key == "ssl.mlp_hidden") t.ssl_head.mlp_hidden = to_long(key, v);
  else if (key == "ssl.temperature") t.ssl_head.temperature = static_cast<float>(to_double(key, v));
  else if (key == "ssl.teacher_temperature")
    t.ssl_head.teacher_temperature = static_cast<float>(to_double(key, v));
  else if (key == "ssl.center_momentum")
    t.ssl_head.center_momentum = static_cast<float>(to_double(key, v));
  else if (key == "ssl.mask_ratio") t.ssl_head.mask_ratio = to_double(key, v);
  else if (key == "ssl.patch_size") t.ssl_head.patch_size = static_cast<int>(to_long(key, v));
  else if (key == "ssl.curl_mode") {
    if (v == "bilinear") t.ssl_head.curl_mode = ssl::InfoNceMode::bilinear;
    else if (v == "dot_temperature") t.ssl_head.curl_mode = ssl::InfoNceMode::dot_temperature;
    else throw ConfigError("config key 'ssl.curl_mode': expected bilinear|dot_temperature");
  } else if (key == "ssl.lambda_latent")
    t.ssl_head.rae_lambda_latent = static_cast<float>(to_double(key, v));
  else if (key == "ssl.lambda_weights")
    t.ssl_head.rae_lambda_weights = static_cast<float>(to_double(key, v));
  else if (key == "ssl.shuffle_swap_prob") t.ssl_head.shuffle_swap_prob = to_double(key, v);
  else if (key == "ssl.separation") {
    if (v == "A") t.separation = ssl::SeparationPoint::A;
    else if (v == "B") t.separation = ssl::SeparationPoint::B;
    else throw ConfigError("config key 'ssl.separation': expected A|B");
  } else if (key.rfind("losses.", 0) == 0) {
    const std::string loss = key.substr(7);
    if (!ssl::is_registered_loss(loss))
      throw ConfigError("config key '" + key + "': unknown loss name '" + loss + "'");
    t.losses.set(loss, to_double(key, v));
  } else {
    return false;
  }
  return true;
}

// Geometry that follows from env/aug settings unless set explicitly.
void finalize_train(train::TrainConfig& t, bool input_size_set, bool channels_set) {
  if (!input_size_set) t.sac.encoder.input_size = t.aug_online.out;
  if (!channels_set) t.sac.encoder.input_channels = 3 * t.env.frame_stack;
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  if (seeds.empty()) throw ConfigError("config: at least one seed required");
  std::vector<uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("config key 'seeds': seeds must be distinct");
  if (name.empty()) throw ConfigError("config key 'name': must be nonempty");
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  bool input_size_set = false, channels_set = false;
  for (const auto& [key, v] : parse_lines(text)) {
    if (key == "name") cfg.name = v;
    else if (key == "output_dir") cfg.output_dir = v;
    else if (key == "seeds") {
      cfg.seeds.clear();
      for (const auto& s : split_list(v))
        cfg.seeds.push_back(static_cast<uint64_t>(to_long(key, s)));
    } else if (key == "encoder.input_size") {
      cfg.train.sac.encoder.input_size = static_cast<int>(to_long(key, v));
      input_size_set = true;
    } else if (key == "encoder.input_channels") {
      cfg.train.sac.encoder.input_channels = static_cast<int>(to_long(key, v));
      channels_set = true;
    } else if (!apply_train_key(cfg.train, key, v)) {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  finalize_train(cfg.train, input_size_set, channels_set);
  cfg.validate();
  return cfg;
}

SearchExperimentConfig parse_search_config(const std::string& text) {
  SearchExperimentConfig cfg;
  bool input_size_set = false, channels_set = false;
  bool space_set = false;
  for (const auto& [key, v] : parse_lines(text)) {
    if (key == "name") cfg.name = v;
    else if (key == "output_dir") cfg.output_dir = v;
    else if (key == "search.losses") {
      cfg.search.space.loss_names = split_list(v);
      space_set = true;
    } else if (key == "search.weight_scale") {
      if (v == "linear") {
        cfg.search.space.scale = evolve::WeightScale::linear;
        cfg.search.space.w_lo = 0.0;
        cfg.search.space.w_hi = 10.0;
      } else if (v == "log10") {
        cfg.search.space.scale = evolve::WeightScale::log10;
        cfg.search.space.w_lo = -4.0;
        cfg.search.space.w_hi = 4.0;
      } else {
        throw ConfigError("config key 'search.weight_scale': expected linear|log10");
      }
    } else if (key == "search.population") cfg.search.population = to_long(key, v);
    else if (key == "search.generations") cfg.search.generations = to_long(key, v);
    else if (key == "search.seed") cfg.search.seed = static_cast<uint64_t>(to_long(key, v));
    else if (key == "search.seeds") cfg.search.objective.seeds = static_cast<int>(to_long(key, v));
    else if (key == "search.init") {
      if (v == "v1") cfg.search.init = evolve::InitStrategy::v1;
      else if (v == "v2") cfg.search.init = evolve::InitStrategy::v2;
      else if (v == "random") cfg.search.init = evolve::InitStrategy::random_init;
      else throw ConfigError("config key 'search.init': expected v1|v2|random");
    } else if (key == "search.mode") {
      if (v == "single_env_iqm")
        cfg.search.objective.mode = evolve::SearchObjective::Mode::single_env_iqm;
      else if (v == "multi_env_normalized")
        cfg.search.objective.mode = evolve::SearchObjective::Mode::multi_env_normalized;
      else throw ConfigError("config key 'search.mode': unknown mode '" + v + "'");
    } else if (key == "search.envs") cfg.search.objective.envs = split_list(v);
    else if (key.rfind("search.reference.", 0) == 0) {
      cfg.search.objective.reference_scores[key.substr(17)] = to_double(key, v);
    } else if (key == "encoder.input_size") {
      cfg.base.sac.encoder.input_size = static_cast<int>(to_long(key, v));
      input_size_set = true;
    } else if (key == "encoder.input_channels") {
      cfg.base.sac.encoder.input_channels = static_cast<int>(to_long(key, v));
      channels_set = true;
    } else if (!apply_train_key(cfg.base, key, v)) {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  if (!space_set) throw ConfigError("config key 'search.losses': required");
  finalize_train(cfg.base, input_size_set, channels_set);
  cfg.search.space.validate();
  cfg.search.objective.validate();
  return cfg;
}

namespace {
std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}
}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(read_file(path));
}

SearchExperimentConfig load_search_config(const std::string& path) {
  return parse_search_config(read_file(path));
}

std::string experiment_config_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  const auto& t = cfg.train;
  os << "name = " << cfg.name << "\n";
  os << "seeds =";
  for (size_t i = 0; i < cfg.seeds.size(); ++i) os << (i ? "," : " ") << cfg.seeds[i];
  os << "\n";
  if (!cfg.output_dir.empty()) os << "output_dir = " << cfg.output_dir << "\n";
  os << "env.name = " << t.env.name << "\n";
  os << "env.obs_render_size = " << t.env.obs_render_size << "\n";
  os << "env.frame_stack = " << t.env.frame_stack << "\n";
  os << "env.action_repeat = " << t.env.action_repeat << "\n";
  os << "env.episode_len = " << t.env.episode_len << "\n";
  os << "env.reward_mode = " << (t.env.reward_mode == env::RewardMode::sparse ? "sparse" : "dense")
     << "\n";
  os << "env.distance_threshold = " << t.env.distance_threshold << "\n";
  os << "aug.online.kind = " << aug_kind_name(t.aug_online.kind) << "\n";
  os << "aug.online.m = " << t.aug_online.m << "\n";
  os << "aug.online.out = " << t.aug_online.out << "\n";
  os << "aug.target.kind = " << aug_kind_name(t.aug_target.kind) << "\n";
  os << "aug.target.m = " << t.aug_target.m << "\n";
  os << "aug.target.out = " << t.aug_target.out << "\n";
  for (const auto& [lname, w] : t.losses.weights) os << "losses." << lname << " = " << w << "\n";
  os << "train.regime = "
     << (t.regime == train::Regime::summed
             ? "summed"
             : t.regime == train::Regime::pretrain_then_rl ? "pretrain_then_rl" : "alternating")
     << "\n";
  os << "train.total_env_steps = " << t.total_env_steps << "\n";
  os << "train.init_explore_steps = " << t.init_explore_steps << "\n";
  os << "train.batch_size = " << t.batch_size << "\n";
  os << "train.buffer_capacity = " << t.buffer_capacity << "\n";
  os << "train.eval_every = " << t.eval_every << "\n";
  os << "train.eval_episodes = " << t.eval_episodes << "\n";
  os << "train.ssl_lr = " << t.ssl_lr << "\n";
  os << "train.w_ssl = " << t.w_ssl << "\n";
  if (t.pretrain_steps > 0) os << "train.pretrain_steps = " << t.pretrain_steps << "\n";
  if (!t.pretrain_dataset.empty()) os << "train.pretrain_dataset = " << t.pretrain_dataset << "\n";
  os << "sac.discount = " << t.sac.discount << "\n";
  os << "sac.init_alpha = " << t.sac.init_alpha << "\n";
  os << "sac.actor_lr = " << t.sac.actor_lr << "\n";
  os << "sac.critic_lr = " << t.sac.critic_lr << "\n";
  os << "sac.alpha_lr = " << t.sac.alpha_lr << "\n";
  os << "sac.encoder_tau = " << t.sac.encoder_tau << "\n";
  os << "sac.critic_tau = " << t.sac.critic_tau << "\n";
  os << "sac.head_tau = " << t.sac.head_tau << "\n";
  os << "sac.actor_update_freq = " << t.sac.actor_update_freq << "\n";
  os << "sac.target_update_freq = " << t.sac.target_update_freq << "\n";
  os << "sac.mlp_layers = " << t.sac.mlp_layers << "\n";
  os << "sac.mlp_hidden = " << t.sac.mlp_hidden << "\n";
  os << "encoder.conv_layers = " << t.sac.encoder.conv_layers << "\n";
  os << "encoder.filters = " << t.sac.encoder.filters << "\n";
  os << "encoder.fc_layers = " << t.sac.encoder.fc_layers << "\n";
  os << "encoder.repr_dim = " << t.sac.encoder.repr_dim << "\n";
  os << "encoder.tanh_out = " << (t.sac.encoder.tanh_out ? "true" : "false") << "\n";
  os << "encoder.extra_linear = " << t.sac.encoder.extra_linear << "\n";
  os << "encoder.kernel = " << t.sac.encoder.kernel << "\n";
  os << "encoder.backbone = "
     << (t.sac.encoder.backbone == agent::Backbone::residual_tail ? "residual_tail" : "plain")
     << "\n";
  const auto strides = t.sac.encoder.resolved_strides();
  os << "encoder.strides =";
  for (size_t i = 0; i < strides.size(); ++i) os << (i ? "," : " ") << strides[i];
  os << "\n";
  os << "ssl.proj_hidden = " << t.ssl_head.proj_hidden << "\n";
  os << "ssl.proj_out = " << t.ssl_head.proj_out << "\n";
  os << "ssl.mlp_hidden = " << t.ssl_head.mlp_hidden << "\n";
  os << "ssl.temperature = " << t.ssl_head.temperature << "\n";
  os << "ssl.teacher_temperature = " << t.ssl_head.teacher_temperature << "\n";
  os << "ssl.center_momentum = " << t.ssl_head.center_momentum << "\n";
  os << "ssl.mask_ratio = " << t.ssl_head.mask_ratio << "\n";
  os << "ssl.patch_size = " << t.ssl_head.patch_size << "\n";
  os << "ssl.curl_mode = "
     << (t.ssl_head.curl_mode == ssl::InfoNceMode::bilinear ? "bilinear" : "dot_temperature")
     << "\n";
  os << "ssl.separation = " << (t.separation == ssl::SeparationPoint::B ? "B" : "A") << "\n";
  return os.str();
}

ExperimentConfig apply_combo(const ExperimentConfig& base, const ssl::LossCombo& combo) {
  ExperimentConfig cfg = base;
  cfg.train.losses = ssl::LossCombo{};
  for (const auto& [name, w] : combo.weights) cfg.train.losses.set(name, w);
  cfg.train.aug_online.m = combo.m1;
  cfg.train.aug_target.m = combo.m2;
  return cfg;
}

}  // namespace jointrl::cli
