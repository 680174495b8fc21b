/* cc demo.c -I../include -L../../../target/release -lmirror_kde_ffi -lm -lpthread -ldl */
#include <stdio.h>
#include "mirror_kde.h"

int main(void) {
    enum { N = 200 };
    double x[N], y[N];
    for (int i = 0; i < N; i++) {
        x[i] = (double)((i * 37) % N);
        y[i] = x[i] + (double)((i * 7919) % 50);
    }
    MkdeSample *s = NULL;
    if (mkde_sample_new(x, y, N, MKDE_SCALING_OVER_N_PLUS1, &s) != MKDE_STATUS_OK) {
        char msg[256];
        mkde_last_error(msg, sizeof msg);
        fprintf(stderr, "error: %s\n", msg);
        return 1;
    }
    double grid[40];
    for (int k = 0; k < 40; k++) grid[k] = 0.01 * (k + 1);
    double h = 0.0;
    mkde_select_bandwidth(s, MKDE_METHOD_LSCV, MKDE_KERNEL_EPANECHNIKOV, grid, 40, &h);

    MkdeEstimator *e = NULL;
    mkde_estimator_new(s, h, MKDE_KERNEL_EPANECHNIKOV, &e);
    double u = 0.5, v = 0.5, c = 0.0;
    mkde_estimator_eval(e, &u, &v, 1, &c);
    printf("mirror-kde %s: h = %.3f, c(0.5, 0.5) = %.4f\n", mkde_version(), h, c);
    mkde_estimator_free(e);
    mkde_sample_free(s);
    return 0;
}
