#include <math.h>
#include <stdio.h>

#include "vitali_tf.h"

int main(void) {
    size_t shape[1] = {32};
    double data[32];
    for (size_t i = 0; i < 32; i++) data[i] = i < 16 ? 0.0 : 1.0;
    VtfTensor *y = NULL;
    if (vtf_tensor_new(shape, 1, data, 32, &y) != VTF_STATUS_OK) return 1;
    VtfFit *fit = NULL;
    if (vtf_fit_margin(y, 1, 0.0, VTF_SOLVER_ACTIVE_SET, &fit) != VTF_STATUS_OK) return 2;
    VtfTensor *f = NULL;
    if (vtf_fit_fitted(fit, &f) != VTF_STATUS_OK) return 3;
    double out[32];
    if (vtf_tensor_data(f, out, 32) != VTF_STATUS_OK) return 4;
    for (size_t i = 0; i < 32; i++)
        if (fabs(out[i] - data[i]) > 1e-8) return 5;
    VtfTensor *bad = NULL;
    if (vtf_tensor_new(shape, 1, data, 31, &bad) != VTF_STATUS_SHAPE || bad != NULL) return 6;
    char msg[128];
    if (vtf_last_error_message(msg, sizeof msg) == 0) return 7;
    vtf_tensor_free(f);
    vtf_fit_free(fit);
    vtf_tensor_free(y);
    printf("ok %s\n", vtf_version());
    return 0;
}
