#include <iostream>
#include <vector>

using namespace std;

int main()
{
    vector<int> squares;
    for (int i = 1; i <= 4; ++i) {
        squares.push_back(i * i);
    }
    int total = 0;
    for (int s : squares) {
        total += s;
    }
    std::cout << total << "\n";
    return 0;
}
