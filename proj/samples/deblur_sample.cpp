// Minimal library walk-through: synthesize a blurred pair, train a small
// model for a few steps, deblur, and score.
#include <iostream>

#include "lmfn/lmfn.hpp"

int main(int argc, char** argv) {
  const int steps = argc > 1 ? std::atoi(argv[1]) : 50;

  lmfn::BlurSpec blur;
  blur.sigma = 1.5;
  std::vector<lmfn::TrainingPair> data;
  for (int i = 0; i < 4; ++i) data.push_back(lmfn::make_training_pair(lmfn::synthetic_scene(32, 32, i), blur));

  lmfn::ModelConfig config;
  config.encoder_width = 16;
  config.decoder_width = 16;
  config.num_scales = 2;
  config.num_rfdb = 2;

  lmfn::TrainOptions opt;
  opt.steps = steps;
  opt.seed = 1;
  opt.log_every = 10;
  opt.on_log = [](const lmfn::TrainLogEntry& e) {
    std::cout << "step " << e.iteration << " loss " << e.loss << '\n';
  };
  lmfn::TrainResult result = lmfn::train(data, config, opt);

  const lmfn::ImagePlane blurred = lmfn::from_tensor(data[0].blurred);
  const lmfn::ImagePlane sharp = lmfn::from_tensor(data[0].sharp);
  const lmfn::ImagePlane restored = lmfn::deblur(result.model, blurred);
  std::cout << "parameters: " << result.model.total_param_count() << '\n'
            << "PSNR blurred:  " << lmfn::psnr(blurred, sharp) << " dB\n"
            << "PSNR restored: " << lmfn::psnr(restored, sharp) << " dB\n";
}
