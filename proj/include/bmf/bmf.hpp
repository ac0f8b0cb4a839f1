#pragma once

#include "errors.hpp"
#include "eval.hpp"
#include "grid.hpp"
#include "ingest.hpp"
#include "kernel.hpp"
#include "model_io.hpp"
#include "random.hpp"
#include "ratings.hpp"
#include "scheduler.hpp"
#include "thread_pool.hpp"
#include "trainer.hpp"
