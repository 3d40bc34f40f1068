#pragma once

#include <memory>
#include <string>
#include <vector>

namespace verifix {

enum class VarKind : unsigned char { Order, Value };

struct VarInfo {
    std::string name;
    VarKind kind = VarKind::Value;
    bool input = false;
};

/// Variables of one trace. Ids are indices. All value variables share one width.
struct SymbolTable {
    unsigned width = 8;
    std::vector<VarInfo> vars;

    int add(std::string name, VarKind kind, bool input = false);
    int find(const std::string& name) const;
    std::size_t size() const { return vars.size(); }
    const VarInfo& operator[](int id) const { return vars[static_cast<std::size_t>(id)]; }
};

using SymbolTablePtr = std::shared_ptr<const SymbolTable>;

} // namespace verifix
