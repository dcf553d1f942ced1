#pragma once

// Umbrella header for the dynamic-ID authentication library.

#include "dynid/adversary.hpp"
#include "dynid/authority.hpp"
#include "dynid/card.hpp"
#include "dynid/clock.hpp"
#include "dynid/digest.hpp"
#include "dynid/error.hpp"
#include "dynid/hash.hpp"
#include "dynid/net.hpp"
#include "dynid/sha256.hpp"
#include "dynid/wire.hpp"
