#ifndef QPSTAB_VERSION_HPP
#define QPSTAB_VERSION_HPP

namespace qpstab {

inline constexpr const char* kVersion = "0.1.0";

}

#endif
