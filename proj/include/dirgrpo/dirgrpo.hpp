#ifndef DIRGRPO_DIRGRPO_HPP_
#define DIRGRPO_DIRGRPO_HPP_

#include "dirgrpo/config.hpp"
#include "dirgrpo/dataset.hpp"
#include "dirgrpo/errors.hpp"
#include "dirgrpo/eval.hpp"
#include "dirgrpo/experiment.hpp"
#include "dirgrpo/grpo.hpp"
#include "dirgrpo/io.hpp"
#include "dirgrpo/kernels.hpp"
#include "dirgrpo/optim.hpp"
#include "dirgrpo/policy.hpp"
#include "dirgrpo/protocol.hpp"
#include "dirgrpo/rewards.hpp"
#include "dirgrpo/rng.hpp"
#include "dirgrpo/sft.hpp"

#define DIRGRPO_VERSION "0.1.0"

#endif  // DIRGRPO_DIRGRPO_HPP_
