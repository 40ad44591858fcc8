//*****************************************************************************
// Copyright 2026 The ALEX Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//*****************************************************************************
#pragma once

#include "alex/error.hpp"
#include "alex/random.hpp"
#include "alex/jsonl.hpp"
#include "alex/corpus.hpp"
#include "alex/balance.hpp"
#include "alex/encoder.hpp"
#include "alex/classifier.hpp"
#include "alex/model.hpp"
#include "alex/verifier.hpp"
#include "alex/mock_client.hpp"
#include "alex/openai_client.hpp"
#include "alex/metrics.hpp"
#include "alex/grid.hpp"
#include "alex/correction.hpp"
#include "alex/simulation.hpp"
#include "alex/projection.hpp"
#include "alex/review_session.hpp"
#include "alex/service.hpp"
#include "alex/synthetic.hpp"
#include "alex/manifest.hpp"
