/* Extract a hypergraph from a document and print its JSON.
 *
 *   cc examples/extract.c -Iinclude target/debug/libhyperkg_ffi.a -lpthread -ldl -lm
 *   ./a.out run.toml document.txt
 */
#include <stdio.h>
#include <stdlib.h>

#include "hyperkg.h"

static char *slurp(const char *path) {
    FILE *f = fopen(path, "rb");
    if (!f) return NULL;
    fseek(f, 0, SEEK_END);
    long n = ftell(f);
    fseek(f, 0, SEEK_SET);
    char *buf = malloc((size_t)n + 1);
    if (buf && fread(buf, 1, (size_t)n, f) != (size_t)n) {
        free(buf);
        buf = NULL;
    }
    if (buf) buf[n] = '\0';
    fclose(f);
    return buf;
}

static int fail(HkgStatus status) {
    char *msg = hkg_last_error();
    fprintf(stderr, "error %d: %s\n", (int)status, msg ? msg : "(none)");
    hkg_string_free(msg);
    return status == HKG_STATUS_FIXTURE_MISS ? 3 : 1;
}

int main(int argc, char **argv) {
    if (argc != 3) {
        fprintf(stderr, "usage: %s <config> <document>\n", argv[0]);
        return 2;
    }
    char *doc = slurp(argv[2]);
    if (!doc) {
        perror(argv[2]);
        return 1;
    }
    HkgEngine *engine = NULL;
    HkgStatus status = hkg_engine_from_file(argv[1], &engine);
    if (status != HKG_STATUS_OK) return fail(status);

    char *graph = NULL;
    status = hkg_extract(engine, "document", doc, NULL, &graph);
    free(doc);
    if (status != HKG_STATUS_OK) {
        hkg_engine_free(engine);
        return fail(status);
    }
    fputs(graph, stdout);
    hkg_string_free(graph);
    hkg_engine_free(engine);
    return 0;
}
