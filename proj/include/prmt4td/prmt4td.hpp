#pragma once

#include "prmt4td/classifier.hpp"
#include "prmt4td/conformal.hpp"
#include "prmt4td/corpus.hpp"
#include "prmt4td/error.hpp"
#include "prmt4td/eval.hpp"
#include "prmt4td/features.hpp"
#include "prmt4td/java_parser.hpp"
#include "prmt4td/labels.hpp"
#include "prmt4td/llm_client.hpp"
#include "prmt4td/model_io.hpp"
#include "prmt4td/pipeline.hpp"
#include "prmt4td/promptkit.hpp"
#include "prmt4td/random.hpp"
#include "prmt4td/similarity.hpp"
#include "prmt4td/synthetic.hpp"
#include "prmt4td/tokenizer.hpp"
