#pragma once

#include "sedma/core.hpp"
#include "sedma/memory_store.hpp"
#include "sedma/crossbar.hpp"
#include "sedma/partitioner.hpp"
#include "sedma/p2p.hpp"
#include "sedma/deployer.hpp"
#include "sedma/pipeline.hpp"
