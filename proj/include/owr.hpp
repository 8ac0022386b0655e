#pragma once

#include "owr/classifiers.hpp"
#include "owr/embedding_store.hpp"
#include "owr/error.hpp"
#include "owr/finch.hpp"
#include "owr/matrix.hpp"
#include "owr/metrics.hpp"
#include "owr/model_io.hpp"
#include "owr/protocol.hpp"
#include "owr/synthetic.hpp"
