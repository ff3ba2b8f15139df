#pragma once

// Umbrella header for the ES-RNN hybrid forecasting engine.

#include "esrnn/autodiff.hpp"
#include "esrnn/checkpoint.hpp"
#include "esrnn/commands.hpp"
#include "esrnn/config.hpp"
#include "esrnn/data.hpp"
#include "esrnn/errors.hpp"
#include "esrnn/holt_winters.hpp"
#include "esrnn/log.hpp"
#include "esrnn/matrix.hpp"
#include "esrnn/metrics.hpp"
#include "esrnn/network.hpp"
#include "esrnn/report.hpp"
#include "esrnn/trainer.hpp"
