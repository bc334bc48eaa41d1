#include <vector>
#include <iostream>

int main()
{
    std::vector<int> values;
    values.push(3);
    std::cout << values.size() << std::endl;
    return 0;
}
