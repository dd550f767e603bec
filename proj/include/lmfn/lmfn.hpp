#pragma once

#include "lmfn/tensor.hpp"
#include "lmfn/autodiff.hpp"
#include "lmfn/ops.hpp"
#include "lmfn/gradcheck.hpp"
#include "lmfn/blocks.hpp"
#include "lmfn/attention.hpp"
#include "lmfn/config.hpp"
#include "lmfn/model.hpp"
#include "lmfn/image.hpp"
#include "lmfn/blur.hpp"
#include "lmfn/metrics.hpp"
#include "lmfn/optim.hpp"
#include "lmfn/checkpoint.hpp"
#include "lmfn/seed.hpp"
#include "lmfn/synthetic.hpp"
#include "lmfn/train.hpp"
#include "lmfn/report.hpp"
#include "lmfn/grad_suite.hpp"
