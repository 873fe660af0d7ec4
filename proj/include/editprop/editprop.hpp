#pragma once

#include "editprop/corpus_miner.hpp"
#include "editprop/edit_generator.hpp"
#include "editprop/edit_model.hpp"
#include "editprop/error.hpp"
#include "editprop/eval.hpp"
#include "editprop/hashing.hpp"
#include "editprop/line_locator.hpp"
#include "editprop/relevance.hpp"
#include "editprop/session.hpp"
#include "editprop/subprocess_backend.hpp"
#include "editprop/tokenizer.hpp"
