#pragma once

#include "bivcal/errors.hpp"
#include "bivcal/linalg.hpp"
#include "bivcal/normal.hpp"
#include "bivcal/random.hpp"
#include "bivcal/dists.hpp"
#include "bivcal/groups.hpp"
#include "bivcal/median.hpp"
#include "bivcal/bma.hpp"
#include "bivcal/data.hpp"
#include "bivcal/em.hpp"
#include "bivcal/copula.hpp"
#include "bivcal/verify.hpp"
#include "bivcal/synth.hpp"
#include "bivcal/serialize.hpp"
#include "bivcal/pipeline.hpp"
