// Reference adapter over file-backed stores: prints the events of a store
// with instants in [from, to) that match a filter document.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "srv/log_store.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Log store adapter"};
    std::string store, filter_doc = "{}";
    srv::Instant from = 0, to = 0;
    bool full_scan = false;
    app.add_option("--store", store, "Store file")->required();
    app.add_option("--from", from, "First instant")->required();
    app.add_option("--to", to, "End instant (exclusive)")->required();
    app.add_option("--filter", filter_doc, "Filter document");
    app.add_flag("--full-scan", full_scan, "Ignore the index sidecar");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (from < 0 || to < from) {
        std::cerr << "srv-adapter: bad range [" << from << ", " << to << ")\n";
        return 2;
    }
    if (!std::filesystem::is_regular_file(store)) {
        std::cerr << "srv-adapter: no store at " << store << '\n';
        return 2;
    }
    srv::json filter;
    try {
        filter = srv::json::parse(filter_doc);
        srv::check_filter_json(filter);
    } catch (const std::exception& e) {
        std::cerr << "srv-adapter: bad filter: " << e.what() << '\n';
        return 2;
    }

    std::vector<std::string> lines;
    try {
        lines = srv::scan_store_lines(store, from, to, filter, !full_scan);
    } catch (const srv::Error& e) {
        std::cerr << "srv-adapter: " << e.what() << '\n';
        return e.code() == srv::Errc::Integrity ? 3 : 2;
    }
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    std::cout << out << std::flush;
    return std::cout ? 0 : 2;
}
