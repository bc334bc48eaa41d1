#include <stdio.h>

int main(void)
{
    int count = 0;
    const char *words[] = {"alpha", "beta", "gamma"};
    for (int i = 0; i < 3; i++) {
        if (words[i][0] != 'b') {
            coutn++;
        }
    }
    printf("%d\n", count);
    return 0;
}
