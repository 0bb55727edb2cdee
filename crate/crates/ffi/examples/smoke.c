/* Minimal C caller for the mlpit library. Build from the workspace root with
 *
 *   cargo build -p mlpit-ffi
 *   cc -Wall -Wextra -Icrates/ffi/include crates/ffi/examples/smoke.c \
 *      -Ltarget/debug -lmlpit_ffi -lm -o smoke
 *   LD_LIBRARY_PATH=target/debug ./smoke
 */

#include <assert.h>
#include <stdio.h>
#include <string.h>
#include "mlpit.h"

int main(void) {
    printf("version %s\n", mlp_version());

    MlpDataset *data = NULL;
    MlpStatus status = mlp_dataset_generate("oversample", "n=60,minority=10", 5, &data, NULL);
    assert(status == MLP_STATUS_OK);
    assert(mlp_dataset_n_samples(data) == 60);

    char *summary = NULL;
    uint32_t violations = 0;
    const char *leaky =
        "pipeline \"demo\" {\n"
        "  load \"d\"\n"
        "  oversample\n"
        "  split stratified 0.6 0.2 0.2\n"
        "  train forest trees=20 depth=8 min_leaf=1\n"
        "  evaluate f1 accuracy\n"
        "}\n";
    status = mlp_exec_source(leaky, data, 2, NULL, &summary, &violations);
    assert(status == MLP_STATUS_OK);
    assert(violations >= 1);
    assert(strstr(summary, "origin_overlap") != NULL);
    printf("%s", summary);
    mlp_string_free(summary);
    mlp_dataset_free(data);

    status = mlp_dataset_load("/no/such/file.csv", &data);
    assert(status == MLP_STATUS_DATA);
    char message[256];
    size_t len = mlp_last_error_message(message, sizeof message);
    assert(len > 0);
    printf("expected failure: %s\n", message);
    puts("C smoke test passed");
    return 0;
}
