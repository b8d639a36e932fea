#pragma once

#include "semfilt/applications.hpp"
#include "semfilt/autoencoder.hpp"
#include "semfilt/error.hpp"
#include "semfilt/evalstats.hpp"
#include "semfilt/image.hpp"
#include "semfilt/patches.hpp"
#include "semfilt/semantics.hpp"
#include "semfilt/trainer.hpp"
#include "semfilt/visualize.hpp"
