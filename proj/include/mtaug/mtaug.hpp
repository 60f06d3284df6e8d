#ifndef MTAUG_MTAUG_HPP
#define MTAUG_MTAUG_HPP

#include "mtaug/common.hpp"
#include "mtaug/corpus.hpp"
#include "mtaug/ngram_lm.hpp"
#include "mtaug/embed.hpp"
#include "mtaug/select.hpp"
#include "mtaug/postedit.hpp"
#include "mtaug/adapt.hpp"
#include "mtaug/evalkit.hpp"
#include "mtaug/pipeline.hpp"

#endif  // MTAUG_MTAUG_HPP
