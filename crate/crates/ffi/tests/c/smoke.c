#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include "fcp.h"

#define CHECK(call)                                                    \
    do {                                                               \
        FcpStatus s_ = (call);                                         \
        if (s_ != FCP_STATUS_OK) {                                     \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,          \
                    fcp_last_error_message());                         \
            return 1;                                                  \
        }                                                              \
    } while (0)

int main(int argc, char **argv) {
    if (argc != 2) return 2;
    FcpNetwork *net = NULL;
    CHECK(fcp_network_load(argv[1], &net));

    double x[2] = {0.5, 0.8};
    FcpExplanation *e = NULL;
    CHECK(fcp_explain(net, x, 2, &e));

    size_t rows = 0, cols = 0;
    CHECK(fcp_explanation_layer_shape(e, 2, &rows, &cols));
    double *theta = calloc(rows * cols, sizeof(double));
    CHECK(fcp_explanation_copy_layer(e, 2, theta, rows * cols));
    for (size_t i = 0; i < rows; i++)
        printf("%zu %.17g %.17g\n", i, theta[i * cols], theta[i * cols + 1]);

    double wide[3] = {0.1, 0.2, 0.3};
    FcpExplanation *bad = NULL;
    if (fcp_explain(net, wide, 3, &bad) != FCP_STATUS_SHAPE || bad != NULL) return 3;
    if (fcp_last_error_message() == NULL) return 4;

    free(theta);
    fcp_explanation_free(e);
    fcp_network_free(net);
    return 0;
}
