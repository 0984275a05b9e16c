// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include "forge/caption.hpp"
#include "forge/config.hpp"
#include "forge/cot.hpp"
#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/gateway.hpp"
#include "forge/pipeline.hpp"
#include "forge/prompts.hpp"
#include "forge/qa.hpp"
#include "forge/reward.hpp"
#include "forge/sft.hpp"
#include "forge/stats.hpp"
#include "forge/store.hpp"
#include "forge/text.hpp"
#include "forge/thread_pool.hpp"
