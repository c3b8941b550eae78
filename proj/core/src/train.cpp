#include "hybridsent/train.hpp"

#include <cstdio>
#include <fstream>

namespace hybridsent {

void write_history_csv(const std::string& path, const TrainHistory& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "epoch,train_loss,val_loss,val_acc\n";
    for (std::size_t i = 0; i < history.train_loss.size(); ++i) {
        char line[160];
        std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g\n", i + 1, history.train_loss[i],
                      history.val_loss[i], history.val_accuracy[i]);
        out << line;
    }
    if (!out) throw DataError("write failure: " + path);
}

}  // namespace hybridsent
