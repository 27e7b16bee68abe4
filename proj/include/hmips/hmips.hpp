#pragma once

#include "hmips/binary_io.hpp"
#include "hmips/data_model.hpp"
#include "hmips/dataset_io.hpp"
#include "hmips/dense_index.hpp"
#include "hmips/error.hpp"
#include "hmips/eval/baselines.hpp"
#include "hmips/eval/benchmark.hpp"
#include "hmips/eval/oracle.hpp"
#include "hmips/eval/ratings.hpp"
#include "hmips/eval/svd.hpp"
#include "hmips/eval/verify.hpp"
#include "hmips/kmeans.hpp"
#include "hmips/lut16.hpp"
#include "hmips/search.hpp"
#include "hmips/sparse_index.hpp"
#include "hmips/synthetic.hpp"
#include "hmips/topk.hpp"
