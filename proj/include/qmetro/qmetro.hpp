#pragma once

#include "qmetro/angmom.hpp"
#include "qmetro/asymptotics.hpp"
#include "qmetro/bayes.hpp"
#include "qmetro/qcore.hpp"
#include "qmetro/qfi.hpp"
#include "qmetro/qfi_opt.hpp"
#include "qmetro/sweep.hpp"
