// Umbrella header.

#ifndef CAPTIONIR_CAPTIONIR_HPP_
#define CAPTIONIR_CAPTIONIR_HPP_

#include "captionir/counts.hpp"
#include "captionir/engine.hpp"
#include "captionir/grammar.hpp"
#include "captionir/lexicon.hpp"
#include "captionir/parser.hpp"
#include "captionir/retrieval.hpp"
#include "captionir/semantics.hpp"
#include "captionir/service.hpp"
#include "captionir/text.hpp"
#include "captionir/trainer.hpp"
#include "captionir/tree.hpp"

#endif  // CAPTIONIR_CAPTIONIR_HPP_
