#pragma once

// The engine stores 32-bit values. Defining DEEPMAL_NN_DOUBLE builds a 64-bit
// variant in a distinct inline namespace so both can be linked into one
// program (gradient checks run against the 64-bit one).
#if defined(DEEPMAL_NN_DOUBLE)
#define DEEPMAL_NN_ABI f64
#else
#define DEEPMAL_NN_ABI f32
#endif

#define DEEPMAL_NN_BEGIN      \
    namespace deepmal::nn {   \
    inline namespace DEEPMAL_NN_ABI {
#define DEEPMAL_NN_END \
    }                  \
    }

DEEPMAL_NN_BEGIN

#if defined(DEEPMAL_NN_DOUBLE)
using Real = double;
#else
using Real = float;
#endif

DEEPMAL_NN_END
