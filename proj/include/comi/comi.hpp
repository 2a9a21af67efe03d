// Copyright (C) 2026 The comi authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "comi/cost_model.hpp"
#include "comi/emb_io.hpp"
#include "comi/error.hpp"
#include "comi/merge.hpp"
#include "comi/metrics.hpp"
#include "comi/mig.hpp"
#include "comi/parallel.hpp"
#include "comi/realloc.hpp"
#include "comi/selection_lab.hpp"
