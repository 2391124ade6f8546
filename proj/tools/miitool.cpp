#include <cstdio>
#include <functional>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "commands.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

void add_family(CLI::App* sub, std::vector<std::string>& comparators, double& noise,
                std::uint64_t& family_seed) {
  sub->add_option("--comparators", comparators, "Comparator labels")->delimiter(',')->capture_default_str();
  sub->add_option("--noise", noise, "Per-capture comparator noise (radians)")->capture_default_str();
  sub->add_option("--family-seed", family_seed, "Seed of the comparator family")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-identity image analysis on synthetic embedding worlds"};
  app.set_version_flag("--version", miitool::kToolVersion);
  app.require_subcommand(1);

  std::string out_dir;
  std::function<nlohmann::json()> params;
  std::string command;

  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out-dir", out_dir, "Output directory")->required();
  };

  miitool::WorldParams wp;
  auto* world = app.add_subcommand("world", "Generate a synthetic embedding world");
  world->add_option("--d", wp.d, "Embedding dimension")->capture_default_str();
  world->add_option("--n-identities", wp.n_identities)->capture_default_str();
  world->add_option("--images-per-identity", wp.images_per_identity)->capture_default_str();
  world->add_option("--regime", wp.regime, "low-intra-class-var | high-intra-class-var | explicit")
      ->capture_default_str();
  world->add_option("--kappa", wp.kappa, "Concentration for the explicit regime")->capture_default_str();
  world->add_option("--kappa-spread", wp.kappa_spread)->capture_default_str();
  world->add_option("--seed", wp.seed)->capture_default_str();
  add_out(world);
  world->callback([&] { command = "world"; params = [&] { return nlohmann::json(wp); }; });

  miitool::EvalParams ep;
  auto* eval = app.add_subcommand("eval", "Thresholds, ROC summary and comparator correlations");
  eval->add_option("--world", ep.world)->required();
  add_family(eval, ep.comparators, ep.noise, ep.family_seed);
  eval->add_option("--seed", ep.seed)->capture_default_str();
  eval->add_option("--negative-cap", ep.negative_cap)->capture_default_str();
  eval->add_option("--hist-bins", ep.hist_bins)->capture_default_str();
  eval->add_option("--format", ep.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  add_out(eval);
  eval->callback([&] { command = "eval"; params = [&] { return nlohmann::json(ep); }; });

  miitool::AttackParams ap;
  auto* attack = app.add_subcommand("attack", "MII success rates per threshold");
  attack->add_option("--world", ap.world)->required();
  attack->add_option("--method", ap.method)->check(CLI::IsMember({"ideal", "gs", "is", "rs-stub"}))
      ->capture_default_str();
  attack->add_option("--attacker", ap.attacker, "Comparator building the MIIs (default: each attacks itself)");
  add_family(attack, ap.comparators, ap.noise, ap.family_seed);
  attack->add_option("--n-attacks", ap.n_attacks)->capture_default_str();
  attack->add_option("--seed", ap.seed)->capture_default_str();
  attack->add_option("--negative-cap", ap.negative_cap)->capture_default_str();
  attack->add_option("--hist-bins", ap.hist_bins)->capture_default_str();
  attack->add_option("--format", ap.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  attack->add_option("--gallery", ap.gallery, "Latent gallery file (gs)");
  attack->add_flag("--index,!--no-index", ap.use_index, "Use the IVF index (gs)");
  attack->add_option("--n-probe", ap.n_probe, "Lists probed by the index, 0 = all (gs)")->capture_default_str();
  attack->add_option("--images-dir", ap.images_dir, "Reference images and landmarks (is)");
  attack->add_option("--image-size", ap.image_size)->capture_default_str();
  attack->add_option("--alpha", ap.alpha, "Morph weight (is)")->capture_default_str();
  add_out(attack);
  attack->callback([&] { command = "attack"; params = [&] { return nlohmann::json(ap); }; });

  miitool::AccompliceParams cp;
  auto* acc = app.add_subcommand("accomplice", "Success conditioned on reference-pair distance");
  acc->add_option("--world", cp.world)->required();
  acc->add_option("--method", cp.method)->check(CLI::IsMember({"ideal", "gs", "rs-stub"}))->capture_default_str();
  acc->add_option("--attacker", cp.attacker)->capture_default_str();
  acc->add_option("--attacked", cp.attacked)->capture_default_str();
  acc->add_option("--noise", cp.noise)->capture_default_str();
  acc->add_option("--family-seed", cp.family_seed)->capture_default_str();
  acc->add_option("--n-attacks", cp.n_attacks)->capture_default_str();
  acc->add_option("--seed", cp.seed)->capture_default_str();
  acc->add_option("--negative-cap", cp.negative_cap)->capture_default_str();
  acc->add_option("--format", cp.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  acc->add_option("--gallery", cp.gallery);
  acc->add_flag("--index,!--no-index", cp.use_index);
  acc->add_option("--n-probe", cp.n_probe)->capture_default_str();
  acc->add_option("--image-size", cp.image_size)->capture_default_str();
  add_out(acc);
  acc->callback([&] { command = "accomplice"; params = [&] { return nlohmann::json(cp); }; });

  miitool::QuadsParams qp;
  auto* quads = app.add_subcommand("quads", "Sample the identity pairs of an attack");
  quads->add_option("--world", qp.world)->required();
  quads->add_option("--n-attacks", qp.n_attacks)->capture_default_str();
  quads->add_option("--seed", qp.seed)->capture_default_str();
  add_out(quads);
  quads->callback([&] { command = "quads"; params = [&] { return nlohmann::json(qp); }; });

  miitool::GsAttackParams sp;
  auto* gs = app.add_subcommand("gs-attack", "Gallery-search MIIs for explicit quads");
  gs->add_option("--world", sp.world)->required();
  gs->add_option("--gallery", sp.gallery)->required();
  gs->add_option("--quads", sp.quads)->required();
  gs->add_option("--comparator", sp.comparator)->capture_default_str();
  gs->add_option("--noise", sp.noise)->capture_default_str();
  gs->add_option("--family-seed", sp.family_seed)->capture_default_str();
  gs->add_option("--seed", sp.seed, "Seed of the threshold pair plan and the index")->capture_default_str();
  gs->add_option("--negative-cap", sp.negative_cap)->capture_default_str();
  gs->add_flag("--index,!--no-index", sp.use_index);
  gs->add_option("--n-probe", sp.n_probe, "Lists probed, 0 = all")->capture_default_str();
  gs->add_option("--format", sp.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  add_out(gs);
  gs->callback([&] { command = "gs-attack"; params = [&] { return nlohmann::json(sp); }; });

  miitool::GalleryParams gp;
  auto* gallery = app.add_subcommand("gallery", "Write a latent gallery file");
  gallery->add_option("--d", gp.d)->capture_default_str();
  gallery->add_option("--size", gp.size)->capture_default_str();
  gallery->add_option("--seed", gp.seed)->capture_default_str();
  gallery->add_option("--midpoints-of", gp.midpoints_of, "World whose attack-pair midpoints form the gallery");
  gallery->add_option("--n-attacks", gp.n_attacks)->capture_default_str();
  add_out(gallery);
  gallery->callback([&] { command = "gallery"; params = [&] { return nlohmann::json(gp); }; });

  miitool::CurveParams vp;
  auto* curve = app.add_subcommand("gallery-curve", "GS success against nested uniform gallery sizes");
  curve->add_option("--world", vp.world)->required();
  curve->add_option("--comparator", vp.comparator)->capture_default_str();
  curve->add_option("--noise", vp.noise)->capture_default_str();
  curve->add_option("--family-seed", vp.family_seed)->capture_default_str();
  curve->add_option("--sizes", vp.sizes)->delimiter(',')->capture_default_str();
  curve->add_option("--n-attacks", vp.n_attacks)->capture_default_str();
  curve->add_option("--seed", vp.seed)->capture_default_str();
  curve->add_option("--negative-cap", vp.negative_cap)->capture_default_str();
  curve->add_option("--format", vp.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  add_out(curve);
  curve->callback([&] { command = "gallery-curve"; params = [&] { return nlohmann::json(vp); }; });

  miitool::MorphParams mp;
  auto* morph = app.add_subcommand("morph", "Landmark morph of two images");
  morph->add_option("--p-image,--img-p", mp.p_image)->required();
  morph->add_option("--p-landmarks,--lms-p", mp.p_landmarks)->required();
  morph->add_option("--q-image,--img-q", mp.q_image)->required();
  morph->add_option("--q-landmarks,--lms-q", mp.q_landmarks)->required();
  morph->add_option("--alpha", mp.alpha)->capture_default_str();
  add_out(morph);
  morph->callback([&] { command = "morph"; params = [&] { return nlohmann::json(mp); }; });

  miitool::RenderParams rp;
  auto* render = app.add_subcommand("render", "Render world captures to images and landmarks");
  render->add_option("--world", rp.world)->required();
  render->add_option("--n-identities", rp.n_identities)->capture_default_str();
  render->add_option("--image-size", rp.image_size)->capture_default_str();
  add_out(render);
  render->callback([&] { command = "render"; params = [&] { return nlohmann::json(rp); }; });

  std::string manifest_path;
  auto* replay = app.add_subcommand("replay", "Re-run a manifest and compare outputs");
  replay->add_option("--manifest", manifest_path)->required();
  add_out(replay);
  replay->callback([&] { command = "replay"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (command == "replay") {
      const auto r = miitool::replay(manifest_path, out_dir);
      for (const auto& f : r.missing) std::cerr << "missing output: " << f << '\n';
      for (const auto& f : r.mismatched) std::cerr << "output differs: " << f << '\n';
      if (!r.ok()) return kExitMismatch;
      std::cout << "replay matches " << manifest_path << '\n';
      return kExitOk;
    }
    const auto m = miitool::run_command(command, params(), out_dir);
    std::cout << "wrote " << m.outputs.size() << " files to " << out_dir << '\n';
    return kExitOk;
  } catch (const mii::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
