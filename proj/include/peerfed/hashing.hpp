#pragma once

#include "peerfed/types.hpp"

#include <initializer_list>

namespace peerfed {

// SHA-256 over a single buffer.
Digest32 sha256(ByteView data);

// SHA-256 over the concatenation of several buffers, without copying.
Digest32 sha256(std::initializer_list<ByteView> parts);

}  // namespace peerfed
