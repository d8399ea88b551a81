#pragma once

// Umbrella header for the discrete prompt induction and transfer toolkit.

#include "promptkit/analysis.hpp"
#include "promptkit/autoprompt.hpp"
#include "promptkit/commands.hpp"
#include "promptkit/config.hpp"
#include "promptkit/corpus.hpp"
#include "promptkit/errors.hpp"
#include "promptkit/eval.hpp"
#include "promptkit/linalg.hpp"
#include "promptkit/lm.hpp"
#include "promptkit/lpaqa.hpp"
#include "promptkit/manifest.hpp"
#include "promptkit/optiprompt.hpp"
#include "promptkit/prompt_store.hpp"
#include "promptkit/registry.hpp"
#include "promptkit/rng.hpp"
#include "promptkit/stats.hpp"
#include "promptkit/stub_lm.hpp"
#include "promptkit/template.hpp"
