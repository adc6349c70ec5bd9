// SPDX-License-Identifier: Apache-2.0
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "weathercycle/errors.hpp"
#include "weathercycle/evalcli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"weathercycle: unpaired multi-weather restoration"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* train = app.add_subcommand("train", "run the unpaired training loop");
  train->add_option("--config", config_path, "key = value config file")->required();

  std::string ckpt, in_dir, out_dir, ref_dir;
  bool psnr_on_luma = false;
  CLI::App* infer = app.add_subcommand("infer", "restore every image in a directory");
  infer->add_option("--ckpt", ckpt, "checkpoint file")->required();
  infer->add_option("--in", in_dir, "input image directory")->required();
  infer->add_option("--out", out_dir, "output directory")->required();
  infer->add_option("--ref", ref_dir, "reference directory for PSNR/SSIM reports");
  infer->add_flag("--psnr-luma", psnr_on_luma, "compute PSNR on the luminance plane instead of RGB");

  std::string degraded_path, clean_path, swap_out;
  CLI::App* swap = app.add_subcommand("analyze-swap", "paired luminance/amplitude exchange study");
  swap->add_option("--degraded", degraded_path, "degraded image")->required();
  swap->add_option("--clean", clean_path, "aligned clean image")->required();
  swap->add_option("--out", swap_out, "output directory")->required();

  std::string classify_dir, backend_spec = "stub";
  CLI::App* classify = app.add_subcommand("classify", "difficulty-classify a directory");
  classify->add_option("--in", classify_dir, "input image directory")->required();
  classify->add_option("--backend", backend_spec, "stub or external:<path>");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version exit 0; any parse failure is usage
  }

  try {
    if (*train) return weathercycle::cmd_train(config_path);
    if (*infer) return weathercycle::cmd_infer(ckpt, in_dir, out_dir, ref_dir, psnr_on_luma);
    if (*swap) return weathercycle::cmd_analyze_swap(degraded_path, clean_path, swap_out);
    if (*classify) return weathercycle::cmd_classify(classify_dir, backend_spec);
  } catch (const weathercycle::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const weathercycle::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const weathercycle::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
